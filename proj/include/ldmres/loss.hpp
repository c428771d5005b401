#pragma once

#include "ldmres/tensor.hpp"

namespace ldmres {

// Channel 1 is foreground throughout; targets are one-hot over 2 channels.
struct DiceResult {
    double loss = 0.0;
    Tensor4 grad_probs;  // zero in the background channel
};

// Soft dice loss over the foreground channel of the whole batch:
//   loss = 1 - (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps),  eps = 1
// with its exact gradient with respect to the probabilities.
DiceResult dice_loss(const Tensor4& probs, const Tensor4& target);

// One-hot (n,2,h,w) target from a binary (n,1,h,w) mask.
Tensor4 mask_to_onehot(const Tensor4& mask);

}  // namespace ldmres
