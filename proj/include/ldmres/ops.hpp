#pragma once

#include <cstdint>
#include <vector>

#include "ldmres/tensor.hpp"

// Differentiable tensor primitives. All convolutions are stride 1 with
// same zero-padding; spatial resizing happens only through maxpool2x2 and
// upsample2x_nearest. Kernels parallelize with OpenMP over independent
// output slices: every element is written by exactly one thread and each
// element's summation order is fixed, so results are bit-identical for any
// thread count.

namespace ldmres {

// ---- convolution -----------------------------------------------------------

// weights dims: (c_out, c_in, k, k), k in {1,2,3}; optional bias length c_out.
// out[n,o,y,x] = sum_{i,dy,dx} w[o,i,dy,dx] * in[n,i,y+dy-k/2,x+dx-k/2],
// zero outside bounds.
Tensor4 conv2d(const Tensor4& input, const Tensor4& weights,
               const std::vector<float>* bias = nullptr);

// Exact adjoint of the forward map. Null output pointers skip that gradient.
void conv2d_backward(const Tensor4& input, const Tensor4& weights, const Tensor4& grad_out,
                     Tensor4* grad_input, Tensor4* grad_weights,
                     std::vector<float>* grad_bias = nullptr);

// ---- batch normalization ----------------------------------------------------

enum class BnMode { Train, Infer };

// Per-channel statistics actually used to normalize, saved for backward.
struct BnStats {
    BnMode mode = BnMode::Train;
    std::vector<float> mean;
    std::vector<float> inv_std;
};

// gamma/beta/running_mean/running_var are (1,c,1,1) tensors. Train mode uses
// the batch mean and biased variance and updates the running statistics as
// running <- momentum*running + (1-momentum)*batch. Infer mode reads the
// running statistics and mutates nothing.
Tensor4 batchnorm(const Tensor4& input, const Tensor4& gamma, const Tensor4& beta,
                  Tensor4& running_mean, Tensor4& running_var,
                  float eps, float momentum, BnMode mode, BnStats* stats = nullptr);

void batchnorm_backward(const Tensor4& input, const Tensor4& gamma, const BnStats& stats,
                        const Tensor4& grad_out,
                        Tensor4* grad_input, Tensor4* grad_gamma, Tensor4* grad_beta);

// ---- pointwise and pooling --------------------------------------------------

Tensor4 relu(const Tensor4& input);
// Gradient is gated by input > 0 (the kink at 0 propagates nothing).
Tensor4 relu_backward(const Tensor4& input, const Tensor4& grad_out);

// Requires even h and w; ties within a window resolve to the first element
// in row-major scan order so backward routing is deterministic. argmax, when
// requested, records the flat input index feeding each output element.
Tensor4 maxpool2x2(const Tensor4& input, std::vector<std::uint32_t>* argmax = nullptr);
Tensor4 maxpool2x2_backward(const Shape4& input_dims, const std::vector<std::uint32_t>& argmax,
                            const Tensor4& grad_out);

// out[y,x] = in[y/2, x/2]; backward sums each 2x2 replica block.
Tensor4 upsample2x_nearest(const Tensor4& input);
Tensor4 upsample2x_backward(const Tensor4& grad_out);

// Per-pixel softmax over the channel axis (c >= 2), max-shifted for stability.
Tensor4 softmax_channel(const Tensor4& input);
Tensor4 softmax_backward(const Tensor4& probs, const Tensor4& grad_out);

// Elementwise sum; the backward pass is the identity into both operands.
Tensor4 add(const Tensor4& a, const Tensor4& b);

}  // namespace ldmres
