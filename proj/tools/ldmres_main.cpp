#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "ldmres/config.hpp"
#include "ldmres/image_io.hpp"
#include "ldmres/log.hpp"
#include "ldmres/manifest.hpp"
#include "ldmres/metrics.hpp"
#include "ldmres/model_io.hpp"
#include "ldmres/network.hpp"
#include "ldmres/train.hpp"

namespace {

using namespace ldmres;

int cmd_train(const std::string& config_path, bool seed_set, std::uint64_t seed) {
    RunConfig cfg = load_run_config(config_path);
    if (cfg.manifest.empty())
        throw ConfigError("config must set 'manifest'");
    if (seed_set) {
        cfg.network.seed = seed;
        cfg.train.seed = seed;
        cfg.train.augment.seed = seed + 1;
    }

    Network net = build_network(cfg.network);
    const ParamCounts counts = count_params(net);
    log_info("built network: " + std::to_string(counts.trainable) + " trainable parameters");

    std::vector<ManifestEntry> manifest = load_manifest(cfg.manifest);
    train(net, manifest, cfg.train);

    save_model(net, cfg.model_out);
    log_info("saved model to " + cfg.model_out);
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& input_path,
                const std::string& output_path, const std::string& gt_path,
                const std::string& overlay_path) {
    Network net = load_model(model_path);
    Tensor4 image = load_image(input_path);
    Prediction pred = predict(net, image);
    save_mask(pred.mask, output_path);
    log_info("wrote mask " + output_path);

    if (!overlay_path.empty()) {
        Tensor4 gt = load_mask(gt_path);
        save_overlay(pred.mask, gt, overlay_path);
        log_info("wrote overlay " + overlay_path);
    }
    return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& manifest_path,
                 const std::string& report_path, const std::string& roc_path, int thresholds,
                 std::string dataset_name) {
    Network net = load_model(model_path);
    std::vector<ManifestEntry> manifest = load_manifest(manifest_path);
    if (manifest.empty())
        throw Error("evaluate: empty manifest");
    if (dataset_name.empty())
        dataset_name = std::filesystem::path(manifest_path).stem().string();

    ConfusionCounts counts;
    // Pixels pooled across the dataset for the threshold sweep (micro-average).
    std::vector<float> all_scores, all_labels;
    for (const ManifestEntry& e : manifest) {
        Tensor4 image = load_image(e.image);
        Tensor4 gt = load_mask(e.mask);
        Tensor4 fov;
        if (e.fov) fov = load_mask(*e.fov);

        Prediction pred = predict(net, image);
        counts += confusion(pred.mask, gt, e.fov ? &fov : nullptr);

        const float* s = pred.fg_probs.data();
        const float* g = gt.data();
        const float* f = e.fov ? fov.data() : nullptr;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (f && f[i] == 0.0f) continue;
            all_scores.push_back(s[i]);
            all_labels.push_back(g[i]);
        }
    }

    MetricSet m = compute_metrics(counts);
    if (m.degenerate)
        log_info("warning: a metric had an empty denominator and was defined to 1.0");

    Tensor4 scores(1, 1, 1, int(all_scores.size()));
    Tensor4 labels(1, 1, 1, int(all_labels.size()));
    std::copy(all_scores.begin(), all_scores.end(), scores.data());
    std::copy(all_labels.begin(), all_labels.end(), labels.data());
    RocResult roc = roc_auc(scores, labels, nullptr, thresholds);

    write_metrics_csv(report_path, dataset_name, m, roc.auc, auc_formula(counts));
    log_info("wrote report " + report_path);
    if (!roc_path.empty()) {
        write_roc_csv(roc_path, roc.curve);
        log_info("wrote ROC points " + roc_path);
    }

    std::printf("dataset=%s se=%.4f sp=%.4f acc=%.4f f1=%.4f auc_roc=%.4f auc_formula=%.4f\n",
                dataset_name.c_str(), m.se, m.sp, m.acc, m.f1, roc.auc, auc_formula(counts));
    return 0;
}

int cmd_params(const std::string& config_path, const std::string& model_path) {
    Network net = config_path.empty() ? load_model(model_path)
                                      : build_network(load_run_config(config_path).network);
    const ParamCounts c = count_params(net);
    std::printf("trainable_params %lld\n", (long long)c.trainable);
    std::printf("total_params %lld\n", (long long)c.total);
    return 0;
}

int cmd_summary(const std::string& model_path) {
    Network net = load_model(model_path);
    std::printf("%-28s %-16s %10s  %s\n", "name", "dims", "params", "trainable");
    for (const Param& p : net.store)
        std::printf("%-28s %-16s %10lld  %s\n", p.name.c_str(), p.value.dims().str().c_str(),
                    (long long)p.value.dims().numel(), p.trainable ? "yes" : "no");
    const ParamCounts c = count_params(net);
    std::printf("total: %lld trainable, %lld with running statistics\n", (long long)c.trainable,
                (long long)c.total);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lightweight dual multiscale residual segmentation engine"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int threads = 0;
    bool seed_set = false;
    app.add_option("--seed", seed, "Override the run seed")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--threads", threads, "OpenMP thread count (1 = strictly serial)");

    auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
    std::string config_path;
    train_cmd->add_option("--config", config_path, "Run configuration file")->required();

    auto* predict_cmd = app.add_subcommand("predict", "Segment one image");
    std::string model_path, input_path, output_path, gt_path, overlay_path;
    predict_cmd->add_option("--model", model_path, "Model file")->required();
    predict_cmd->add_option("--input", input_path, "Input PGM/PPM image")->required();
    predict_cmd->add_option("--output", output_path, "Output mask (PGM)")->required();
    predict_cmd->add_option("--gt", gt_path, "Ground-truth mask for the overlay");
    predict_cmd->add_option("--overlay", overlay_path, "TP/FP/FN overlay output (PPM)")
        ->needs(predict_cmd->get_option("--gt"));

    auto* eval_cmd = app.add_subcommand("evaluate", "Compute dataset metrics");
    std::string eval_model, eval_manifest, report_path, roc_path, dataset_name;
    int thresholds = 256;
    eval_cmd->add_option("--model", eval_model, "Model file")->required();
    eval_cmd->add_option("--manifest", eval_manifest, "Dataset manifest")->required();
    eval_cmd->add_option("--report", report_path, "Metrics CSV output")->required();
    eval_cmd->add_option("--roc", roc_path, "ROC points CSV output");
    eval_cmd->add_option("--thresholds", thresholds, "ROC threshold count");
    eval_cmd->add_option("--name", dataset_name, "Dataset label in the report");

    auto* params_cmd = app.add_subcommand("params", "Print parameter counts");
    std::string params_config, params_model;
    params_cmd->add_option("--config", params_config, "Run configuration file");
    params_cmd->add_option("--model", params_model, "Model file");

    auto* summary_cmd = app.add_subcommand("summary", "Print the per-layer parameter table");
    std::string summary_model;
    summary_cmd->add_option("--model", summary_model, "Model file")->required();

    CLI11_PARSE(app, argc, argv);

    if (threads > 0)
        omp_set_num_threads(threads);

    try {
        if (train_cmd->parsed()) return cmd_train(config_path, seed_set, seed);
        if (predict_cmd->parsed())
            return cmd_predict(model_path, input_path, output_path, gt_path, overlay_path);
        if (eval_cmd->parsed())
            return cmd_evaluate(eval_model, eval_manifest, report_path, roc_path, thresholds,
                                dataset_name);
        if (params_cmd->parsed()) {
            if (params_config.empty() == params_model.empty()) {
                std::fprintf(stderr, "params: pass exactly one of --config or --model\n");
                return 2;
            }
            return cmd_params(params_config, params_model);
        }
        if (summary_cmd->parsed()) return cmd_summary(summary_model);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
