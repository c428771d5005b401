#include "ldmres/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "ldmres/image_io.hpp"
#include "ldmres/log.hpp"
#include "ldmres/loss.hpp"
#include "ldmres/metrics.hpp"
#include "ldmres/model_io.hpp"
#include "ldmres/optim.hpp"

namespace ldmres {

namespace {

void check_config(const TrainConfig& c) {
    if (c.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (c.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (c.lr < 0.0f) throw ConfigError("train: lr must be >= 0");
    if (!(c.lr_decay > 0.0f && c.lr_decay <= 1.0f))
        throw ConfigError("train: lr_decay must be in (0,1]");
    if (!(c.split_ratio > 0.0 && c.split_ratio <= 1.0))
        throw ConfigError("train: split_ratio must be in (0,1]");
    if (c.checkpoint_every > 0 && c.checkpoint_prefix.empty())
        throw ConfigError("train: checkpoint_every needs checkpoint_prefix");
}

// Stacks samples [first, last) into one batch pair.
void make_batch(const std::vector<Sample>& set, const std::vector<std::size_t>& order,
                std::size_t first, std::size_t last, Tensor4* images, Tensor4* masks) {
    const Shape4 d = set[order[first]].image.dims();
    const int bn = int(last - first);
    *images = Tensor4(bn, d.c, d.h, d.w);
    *masks = Tensor4(bn, 1, d.h, d.w);
    for (int b = 0; b < bn; ++b) {
        const Sample& s = set[order[first + std::size_t(b)]];
        if (!(s.image.dims() == d))
            throw ShapeError("train: mixed image dims in one batch: " + s.image.dims().str() +
                             " vs " + d.str());
        std::copy(s.image.data(), s.image.data() + s.image.size(),
                  images->data() + std::size_t(b) * s.image.size());
        std::copy(s.mask.data(), s.mask.data() + s.mask.size(),
                  masks->data() + std::size_t(b) * s.mask.size());
    }
}

struct ValScore {
    double loss = std::numeric_limits<double>::quiet_NaN();
    double f1 = std::numeric_limits<double>::quiet_NaN();
};

ValScore validate(Network& net, const std::vector<Sample>& val_set) {
    ValScore v;
    if (val_set.empty()) return v;
    double loss_sum = 0.0;
    ConfusionCounts counts;
    for (const Sample& s : val_set) {
        Tensor4 probs = forward(net, s.image, BnMode::Infer);
        loss_sum += dice_loss(probs, mask_to_onehot(s.mask)).loss;
        counts += confusion(probs_to_mask(probs), s.mask);
    }
    v.loss = loss_sum / double(val_set.size());
    v.f1 = compute_metrics(counts).f1;
    return v;
}

void append_history_row(const std::string& path, const EpochStats& e) {
    std::ofstream out(path, std::ios::app);
    if (!out)
        throw IoError("cannot write history: " + path);
    char line[192];
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%.9g", e.epoch, double(e.lr),
                  e.train_loss, e.val_loss, e.val_f1);
    out << line << "\n";
}

}  // namespace

void load_samples(const std::vector<ManifestEntry>& manifest, const NetworkConfig& netcfg,
                  const TrainConfig& config, std::vector<Sample>* train_set,
                  std::vector<Sample>* val_set) {
    if (manifest.empty())
        throw Error("train: empty manifest");

    std::vector<Sample> samples;
    for (const ManifestEntry& entry : manifest) {
        Tensor4 image = load_image(entry.image);
        Tensor4 mask = load_mask(entry.mask);
        if (image.dims().c != netcfg.in_channels)
            throw ShapeError(entry.image + ": has " + std::to_string(image.dims().c) +
                             " channels, network expects " + std::to_string(netcfg.in_channels));
        if (image.dims().h != mask.dims().h || image.dims().w != mask.dims().w)
            throw ShapeError(entry.image + ": image/mask dims differ");

        if (config.patch_size > 0) {
            std::vector<Patch> ip = extract_patches(image, config.patch_size);
            std::vector<Patch> mp = extract_patches(mask, config.patch_size);
            for (std::size_t k = 0; k < ip.size(); ++k)
                samples.push_back({std::move(ip[k].data), std::move(mp[k].data)});
        } else {
            samples.push_back({std::move(image), std::move(mask)});
        }
    }

    for (Sample& s : samples)
        s.image = zscore_normalize(s.image);

    if (config.split_ratio >= 1.0) {
        *train_set = std::move(samples);
        val_set->clear();
    } else {
        auto [tr, va] = split_dataset(samples, config.split_ratio, config.seed);
        *train_set = std::move(tr);
        *val_set = std::move(va);
    }
}

std::vector<EpochStats> train_on_samples(Network& net, const std::vector<Sample>& train_set,
                                         const std::vector<Sample>& val_set,
                                         const TrainConfig& config) {
    check_config(config);
    if (train_set.empty())
        throw Error("train: no training samples");

    AdamHyper hyper;
    hyper.lr = config.lr;
    AdamState adam(net.store, hyper);

    Rng shuffle_rng(config.seed);
    Rng augment_rng(config.augment.seed);

    if (!config.history_path.empty()) {
        std::ofstream out(config.history_path, std::ios::trunc);
        if (!out)
            throw IoError("cannot write history: " + config.history_path);
        out << "epoch,lr,train_loss,val_loss,val_f1\n";
    }

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<EpochStats> history;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t first = 0; first < order.size(); first += std::size_t(config.batch_size)) {
            const std::size_t last = std::min(order.size(), first + std::size_t(config.batch_size));

            Tensor4 images, masks;
            if (config.augment_enabled) {
                // Augment per sample, then stack.
                std::vector<Sample> batch_samples;
                batch_samples.reserve(last - first);
                for (std::size_t i = first; i < last; ++i) {
                    Sample s = train_set[order[i]];
                    augment(s.image, s.mask, config.augment, augment_rng);
                    batch_samples.push_back(std::move(s));
                }
                std::vector<std::size_t> ident(batch_samples.size());
                for (std::size_t i = 0; i < ident.size(); ++i) ident[i] = i;
                make_batch(batch_samples, ident, 0, batch_samples.size(), &images, &masks);
            } else {
                make_batch(train_set, order, first, last, &images, &masks);
            }

            NetTape tape;
            Tensor4 probs = forward(net, images, BnMode::Train, &tape);
            DiceResult dice = dice_loss(probs, mask_to_onehot(masks));
            loss_sum += dice.loss;
            ++batches;

            GradStore grads = network_backward(net, tape, dice.grad_probs);
            adam.step(net.store, grads);
        }

        EpochStats e;
        e.epoch = epoch;
        e.lr = adam.hyper().lr;
        e.train_loss = loss_sum / double(batches);
        const ValScore v = validate(net, val_set);
        e.val_loss = v.loss;
        e.val_f1 = v.f1;
        history.push_back(e);

        if (!config.history_path.empty())
            append_history_row(config.history_path, e);

        char msg[160];
        std::snprintf(msg, sizeof msg, "epoch %d/%d lr=%.3g train_loss=%.5f val_loss=%.5f val_f1=%.4f",
                      epoch, config.epochs, double(e.lr), e.train_loss, e.val_loss, e.val_f1);
        log_info(msg);

        adam.hyper().lr *= config.lr_decay;

        if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0)
            save_model(net, config.checkpoint_prefix + "_epoch" + std::to_string(epoch) + ".ldmr");
    }
    return history;
}

std::vector<EpochStats> train(Network& net, const std::vector<ManifestEntry>& manifest,
                              const TrainConfig& config) {
    check_config(config);
    std::vector<Sample> train_set, val_set;
    load_samples(manifest, net.config, config, &train_set, &val_set);
    log_info("training on " + std::to_string(train_set.size()) + " samples, validating on " +
             std::to_string(val_set.size()));
    return train_on_samples(net, train_set, val_set, config);
}

Prediction predict(Network& net, const Tensor4& image) {
    Tensor4 normalized = zscore_normalize(image);
    Tensor4 probs = forward(net, normalized, BnMode::Infer);
    Prediction p;
    p.mask = probs_to_mask(probs);
    const Shape4 d = probs.dims();
    p.fg_probs = Tensor4(d.n, 1, d.h, d.w);
    for (int n = 0; n < d.n; ++n)
        std::copy(probs.plane(n, 1), probs.plane(n, 1) + std::size_t(d.h) * d.w,
                  p.fg_probs.plane(n, 0));
    return p;
}

}  // namespace ldmres
