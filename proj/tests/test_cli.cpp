#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "ldmres/image_io.hpp"
#include "ldmres/model_io.hpp"
#include "ldmres/network.hpp"
#include "test_util.hpp"

using namespace ldmres;

namespace {

struct RunResult {
    int status = -1;
    std::string out;
    std::string err;
};

// Runs the built CLI binary with LDMRES_LOG=quiet and captures both streams.
RunResult run_cli(const std::string& args, const std::string& dir) {
    const std::string out = dir + "/stdout.txt";
    const std::string err = dir + "/stderr.txt";
    const std::string cmd = std::string("LDMRES_LOG=quiet ") + LDMRES_CLI_PATH + " " + args +
                            " > " + out + " 2> " + err;
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = testutil::read_file(out);
    r.err = testutil::read_file(err);
    return r;
}

std::string write_tiny_config(const std::string& dir, const std::string& manifest) {
    const std::string cfg = dir + "/run.cfg";
    testutil::write_file(cfg,
                         "# tiny run\n"
                         "in_channels = 3\n"
                         "num_classes = 2\n"
                         "stem_width = 2\n"
                         "stage_widths = 2,2,2\n"
                         "seed = 9\n"
                         "epochs = 2\n"
                         "batch_size = 2\n"
                         "lr = 0.001\n"
                         "lr_decay = 1.0\n"
                         "augment = false\n"
                         "split_ratio = 0.8\n"
                         "manifest = " + manifest + "\n"
                         "model_out = " + dir + "/model.ldmr\n"
                         "history_out = " + dir + "/history.csv\n");
    return cfg;
}

std::string write_corpus(const std::string& dir) {
    std::string lines;
    auto corpus = testutil::disc_stripe_corpus(16, 16);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const std::string img = dir + "/img" + std::to_string(i) + ".ppm";
        const std::string msk = dir + "/msk" + std::to_string(i) + ".pgm";
        save_ppm(corpus[i].image, img);
        save_mask(corpus[i].mask, msk);
        lines += img + "\t" + msk + "\n";
    }
    const std::string manifest = dir + "/data.tsv";
    testutil::write_file(manifest, lines);
    return manifest;
}

}  // namespace

TEST_CASE("usage errors exit nonzero") {
    const std::string dir = testutil::make_temp_dir("cli_usage");
    CHECK(run_cli("", dir).status != 0);
    CHECK(run_cli("frobnicate", dir).status != 0);
    CHECK(run_cli("train", dir).status != 0);  // missing --config
    CHECK(run_cli("predict --model x.ldmr", dir).status != 0);
}

TEST_CASE("params prints the golden count for the reference config") {
    const std::string dir = testutil::make_temp_dir("cli_params");
    const std::string cfg = dir + "/ref.cfg";
    testutil::write_file(cfg, "stem_width = 8\nstage_widths = 8,16,32\n");
    RunResult r = run_cli("params --config " + cfg, dir);
    CHECK(r.status == 0);
    CHECK(r.out.find("trainable_params 78572") != std::string::npos);
    CHECK(r.out.find("total_params 80304") != std::string::npos);

    RunResult both = run_cli("params", dir);
    CHECK(both.status != 0);
}

TEST_CASE("train then predict then evaluate end to end") {
    const std::string dir = testutil::make_temp_dir("cli_e2e");
    const std::string manifest = write_corpus(dir);
    const std::string cfg = write_tiny_config(dir, manifest);

    RunResult tr = run_cli("--threads 1 train --config " + cfg, dir);
    CHECK(tr.status == 0);
    REQUIRE(std::filesystem::exists(dir + "/model.ldmr"));
    const std::string history = testutil::read_file(dir + "/history.csv");
    CHECK(history.rfind("epoch,lr,train_loss,val_loss,val_f1\n", 0) == 0);
    CHECK(std::count(history.begin(), history.end(), '\n') == 3);  // header + 2 epochs

    // Predict on one training image.
    RunResult pr = run_cli("predict --model " + dir + "/model.ldmr --input " + dir +
                               "/img0.ppm --output " + dir + "/pred.pgm --gt " + dir +
                               "/msk0.pgm --overlay " + dir + "/ovl.ppm",
                           dir);
    CHECK(pr.status == 0);
    Tensor4 mask = load_mask(dir + "/pred.pgm");  // proves values are {0,255} bytes
    CHECK(mask.dims() == Shape4{1, 1, 16, 16});
    CHECK(std::filesystem::exists(dir + "/ovl.ppm"));

    // Evaluate against the prediction itself: all pixel metrics are 1.
    bool has_fg = false, has_bg = false;
    for (std::size_t i = 0; i < mask.size(); ++i)
        (mask[i] != 0.0f ? has_fg : has_bg) = true;
    if (has_fg && has_bg) {
        testutil::write_file(dir + "/self.tsv", dir + "/img0.ppm\t" + dir + "/pred.pgm\n");
        RunResult ev = run_cli("evaluate --model " + dir + "/model.ldmr --manifest " + dir +
                                   "/self.tsv --report " + dir + "/report.csv --roc " + dir +
                                   "/roc.csv --name self",
                               dir);
        CHECK(ev.status == 0);
        const std::string report = testutil::read_file(dir + "/report.csv");
        CHECK(report.find("self,1.000000,1.000000,1.000000,1.000000") != std::string::npos);
        CHECK(testutil::read_file(dir + "/roc.csv").rfind("threshold,fpr,tpr\n", 0) == 0);
    }

    RunResult su = run_cli("summary --model " + dir + "/model.ldmr", dir);
    CHECK(su.status == 0);
    CHECK(su.out.find("stem.w") != std::string::npos);
    CHECK(su.out.find("total:") != std::string::npos);
}

TEST_CASE("predict on a plain 16x16 PPM yields a binary PGM of the same size") {
    const std::string dir = testutil::make_temp_dir("cli_predict");
    NetworkConfig nc;
    nc.stem_width = 2;
    nc.stage_widths = {2, 2, 2};
    nc.seed = 3;
    Network net = build_network(nc);
    save_model(net, dir + "/m.ldmr");

    Rng rng(70);
    Tensor4 img = testutil::random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0);
    save_ppm(img, dir + "/in.ppm");

    RunResult r = run_cli(
        "predict --model " + dir + "/m.ldmr --input " + dir + "/in.ppm --output " + dir +
            "/out.pgm",
        dir);
    CHECK(r.status == 0);
    Tensor4 out = load_image(dir + "/out.pgm");
    CHECK(out.dims() == Shape4{1, 1, 16, 16});
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK((out[i] == 0.0f || out[i] == 1.0f));
}

TEST_CASE("train is deterministic given --seed and --threads 1") {
    const std::string dir = testutil::make_temp_dir("cli_determinism");
    const std::string manifest = write_corpus(dir);
    const std::string cfg = write_tiny_config(dir, manifest);

    auto run_once = [&](const std::string& tag) {
        const std::string hist = dir + "/h_" + tag + ".csv";
        std::string text = testutil::read_file(cfg);
        text = text.substr(0, text.find("history_out")) + "history_out = " + hist + "\n";
        const std::string cfg_tag = dir + "/run_" + tag + ".cfg";
        testutil::write_file(cfg_tag, text);
        RunResult r = run_cli("--seed 77 --threads 1 train --config " + cfg_tag, dir);
        CHECK(r.status == 0);
        return testutil::read_file(hist);
    };
    const std::string a = run_once("a");
    const std::string b = run_once("b");
    CHECK(!a.empty());
    CHECK(a == b);
}

TEST_CASE("config errors are reported with nonzero status") {
    const std::string dir = testutil::make_temp_dir("cli_cfgerr");
    testutil::write_file(dir + "/bad.cfg", "no_such_key = 1\n");
    RunResult r = run_cli("params --config " + dir + "/bad.cfg", dir);
    CHECK(r.status != 0);
    CHECK(r.err.find("unknown key") != std::string::npos);
}
