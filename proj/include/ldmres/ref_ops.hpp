#pragma once

#include <cstdint>
#include <vector>

#include "ldmres/ops.hpp"
#include "ldmres/tensor.hpp"

// Serial reference implementations of every primitive, written as direct
// transcriptions of the defining summations. They share no code with the
// OpenMP kernels in ops.cpp; tests compare the two paths and the benchmark
// tool times them against each other. Do not optimize these.

namespace ldmres::ref {

Tensor4 conv2d(const Tensor4& input, const Tensor4& weights,
               const std::vector<float>* bias = nullptr);
void conv2d_backward(const Tensor4& input, const Tensor4& weights, const Tensor4& grad_out,
                     Tensor4* grad_input, Tensor4* grad_weights,
                     std::vector<float>* grad_bias = nullptr);

Tensor4 batchnorm(const Tensor4& input, const Tensor4& gamma, const Tensor4& beta,
                  Tensor4& running_mean, Tensor4& running_var,
                  float eps, float momentum, BnMode mode, BnStats* stats = nullptr);
void batchnorm_backward(const Tensor4& input, const Tensor4& gamma, const BnStats& stats,
                        const Tensor4& grad_out,
                        Tensor4* grad_input, Tensor4* grad_gamma, Tensor4* grad_beta);

Tensor4 relu(const Tensor4& input);
Tensor4 relu_backward(const Tensor4& input, const Tensor4& grad_out);

Tensor4 maxpool2x2(const Tensor4& input, std::vector<std::uint32_t>* argmax = nullptr);
Tensor4 maxpool2x2_backward(const Shape4& input_dims, const std::vector<std::uint32_t>& argmax,
                            const Tensor4& grad_out);

Tensor4 upsample2x_nearest(const Tensor4& input);
Tensor4 upsample2x_backward(const Tensor4& grad_out);

Tensor4 softmax_channel(const Tensor4& input);
Tensor4 softmax_backward(const Tensor4& probs, const Tensor4& grad_out);

Tensor4 add(const Tensor4& a, const Tensor4& b);

}  // namespace ldmres::ref
