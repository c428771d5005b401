#pragma once

#include <optional>
#include <string>

#include "ldmres/tensor.hpp"

namespace ldmres {

// Binary PGM (P5) and PPM (P6), 8-bit, maxval 255 only. Values scale to
// [0,1]; grayscale decodes to (1,1,h,w), RGB to (1,3,h,w).
Tensor4 load_image(const std::string& path);

// Raw 8-bit writers; bytes in [0,1] are scaled back to 0..255.
void save_pgm(const Tensor4& gray, const std::string& path);
void save_ppm(const Tensor4& rgb, const std::string& path);

// Binary mask as P5 with foreground 255, background 0.
void save_mask(const Tensor4& mask, const std::string& path);

// Tri-color P6 comparison image: true positives green, false positives red,
// false negatives blue, true negatives black.
void save_overlay(const Tensor4& pred_mask, const Tensor4& gt_mask, const std::string& path);

// Enforces the binary-mask contract of dataset masks (values 0 or 1 after
// scaling); throws otherwise.
Tensor4 load_mask(const std::string& path);

}  // namespace ldmres
