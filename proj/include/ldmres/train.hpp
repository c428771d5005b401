#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldmres/data.hpp"
#include "ldmres/manifest.hpp"
#include "ldmres/network.hpp"

namespace ldmres {

struct TrainConfig {
    int epochs = 10;
    int batch_size = 2;
    float lr = 2e-5f;
    float lr_decay = 0.9f;  // multiplicative, applied after each epoch
    std::uint64_t seed = 0;
    int checkpoint_every = 0;        // in epochs; 0 disables checkpoints
    std::string checkpoint_prefix;   // "<prefix>_epoch<N>.ldmr"
    int patch_size = 0;              // 0 trains on whole images
    double split_ratio = 0.8;        // 1.0 keeps every sample in the train set
    bool augment_enabled = true;
    AugmentPolicy augment;
    std::string history_path;        // csv "epoch,lr,train_loss,val_loss,val_f1"; empty skips
};

struct EpochStats {
    int epoch = 0;      // 1-based
    float lr = 0.0f;    // rate used during this epoch
    double train_loss = 0.0;
    double val_loss = 0.0;  // NaN when there is no validation split
    double val_f1 = 0.0;
};

struct Sample {
    Tensor4 image;  // z-scored
    Tensor4 mask;   // binary, 1 channel
};

// Loads and prepares the dataset: decode, optional patch tiling, z-score
// normalization, train/validation split.
void load_samples(const std::vector<ManifestEntry>& manifest, const NetworkConfig& netcfg,
                  const TrainConfig& config, std::vector<Sample>* train_set,
                  std::vector<Sample>* val_set);

// Per epoch: seeded shuffle, augmentation, forward in train mode, dice loss,
// backward, ADAM step; the learning rate decays by lr_decay afterwards.
// History rows are appended to config.history_path as epochs complete.
std::vector<EpochStats> train(Network& net, const std::vector<ManifestEntry>& manifest,
                              const TrainConfig& config);

// Same loop over pre-built samples (what the manifest variant calls after
// load_samples).
std::vector<EpochStats> train_on_samples(Network& net, const std::vector<Sample>& train_set,
                                         const std::vector<Sample>& val_set,
                                         const TrainConfig& config);

struct Prediction {
    Tensor4 mask;      // binary (1,1,h,w)
    Tensor4 fg_probs;  // foreground probability (1,1,h,w)
};

// z-score + inference-mode forward on a single [0,1]-scaled image.
Prediction predict(Network& net, const Tensor4& image);

}  // namespace ldmres
