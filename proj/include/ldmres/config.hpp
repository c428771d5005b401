#pragma once

#include <string>

#include "ldmres/network.hpp"
#include "ldmres/train.hpp"

namespace ldmres {

// Line-based "key = value" run configuration; '#' starts a comment and blank
// lines are skipped. Unknown keys are hard errors. Relative paths resolve
// against the config file's directory.
//
// Keys: in_channels, num_classes, stem_width, stage_widths (e.g. "8,16,32"),
// seed, manifest, epochs, batch_size, lr, lr_decay, split_ratio,
// checkpoint_every, checkpoint_prefix, patch_size, augment, hflip, vflip,
// brightness, contrast_lo, contrast_hi, rotation_min, rotation_max,
// model_out, history_out.
struct RunConfig {
    NetworkConfig network;
    TrainConfig train;
    std::string manifest;
    std::string model_out = "model.ldmr";
};

RunConfig load_run_config(const std::string& path);

}  // namespace ldmres
