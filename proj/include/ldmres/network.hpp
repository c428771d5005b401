#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "ldmres/ops.hpp"
#include "ldmres/params.hpp"
#include "ldmres/tensor.hpp"

// Encoder-decoder segmentation network built from dual multiscale residual
// blocks.
//
// Pipeline: a 1x1 conv+BN+ReLU stem produces the full-resolution feature f1;
// three encoder stages each apply a 1x1 then 3x3 conv+BN transition, ReLU and
// 2x2 max-pool, then a dual multiscale residual block, yielding features at
// 1/2, 1/4 and 1/8 resolution; the decoder mirrors this with a block (fed the
// matching encoder skip) followed by upsample + 1x1/3x3 transition per stage;
// the head applies 3x3 conv+BN, adds f1, applies 3x3 conv+BN down to the
// class count, then ReLU and channel softmax.
//
// Every block keeps its channel width; widths only change inside transitions,
// so the decoder skip additions type-check by construction.

namespace ldmres {

struct NetworkConfig {
    int in_channels = 3;
    int num_classes = 2;
    int stem_width = 8;
    std::array<int, 3> stage_widths{8, 16, 32};
    std::uint64_t seed = 0;
};

// One conv immediately followed by batch normalization (no conv bias).
struct ConvBnUnit {
    int w = -1;                                   // weight handle
    int gamma = -1, beta = -1, rmean = -1, rvar = -1;
    int k = 0, cin = 0, cout = 0;
};

// Dual multiscale residual block, width-preserving:
//   s1  = ReLU(bn(conv1(x)) + bn(conv3(x)) [+ skip])
//   s2  = ReLU(bn(conv1(s1)) + s1)
//   out = bn(conv1(x)) + bn(conv1(s2)) + bn(conv3(s2))
struct DualMrbUnit {
    ConvBnUnit proj_in;            // 1x1 shortcut from the block input
    ConvBnUnit s1_k1, s1_k3;       // parallel 1x1 / 3x3 into s1
    ConvBnUnit s2_proj;            // 1x1 refinement into s2
    ConvBnUnit out_k1, out_k3;     // parallel 1x1 / 3x3 from s2
    int width = 0;
};

struct EncTransition { ConvBnUnit c1, c3; };  // conv 1x1, conv 3x3, ReLU, pool
struct DecTransition { ConvBnUnit c1, c3; };  // upsample, conv 1x1, conv 3x3, ReLU
struct HeadUnit { ConvBnUnit a, b; };         // 3x3 (+f1 add between), 3x3 to classes

struct Network {
    NetworkConfig config;
    ParamStore store;
    ConvBnUnit stem;
    std::array<EncTransition, 3> enc_transitions;
    std::array<DualMrbUnit, 3> enc_blocks;
    std::array<DualMrbUnit, 3> dec_blocks;
    std::array<DecTransition, 3> dec_transitions;
    HeadUnit head;
    float bn_eps = 1e-5f;
    float bn_momentum = 0.9f;
};

// ---- construction -----------------------------------------------------------

ConvBnUnit add_conv_bn(ParamStore& store, const std::string& prefix, int k, int cin, int cout);
DualMrbUnit add_dual_mrb(ParamStore& store, const std::string& prefix, int width);

// Wires the graph and initializes weights from config.seed.
Network build_network(const NetworkConfig& config);

// Conv weights ~ Normal(0, 2/fan_in) from the counter-based generator in
// rng.hpp; gamma = 1, beta = 0, running mean = 0, running var = 1.
void init_weights(Network& net, std::uint64_t seed);

struct ParamCounts {
    std::int64_t trainable = 0;  // conv weights + BN gamma/beta
    std::int64_t total = 0;      // plus BN running statistics
};
ParamCounts count_params(const Network& net);

// ---- forward / backward ------------------------------------------------------

struct ConvBnTape {
    Tensor4 conv_in;
    Tensor4 conv_out;  // BN input
    BnStats bn;
};

struct MrbTape {
    ConvBnTape proj_in, s1_k1, s1_k3, s2_proj, out_k1, out_k3;
    Tensor4 s1_pre, s2_pre;  // pre-ReLU sums
    Tensor4 s2;
    bool has_skip = false;
};

struct EncTransTape {
    ConvBnTape c1, c3;
    Tensor4 relu_in;
    Shape4 pool_in_dims;
    std::vector<std::uint32_t> pool_argmax;
};

struct DecTransTape {
    ConvBnTape c1, c3;
    Tensor4 relu_in;
};

struct HeadTape {
    ConvBnTape a, b;
    Tensor4 relu_in;
    Tensor4 probs;
};

// Saved activations from one training-mode forward pass; consumed by exactly
// one network_backward call.
struct NetTape {
    ConvBnTape stem;
    Tensor4 stem_relu_in;
    std::array<EncTransTape, 3> enc_t;
    std::array<MrbTape, 3> enc_b;
    std::array<DecTransTape, 3> dec_t;
    std::array<MrbTape, 3> dec_b;
    HeadTape head;
    std::array<Shape4, 3> encoder_stage_dims;  // block outputs at 1/2, 1/4, 1/8
    bool consumed = false;
};

struct MrbResult {
    Tensor4 out;
    Tensor4 s1;
};

// Standalone block evaluation; skip, when present, must match the s1 dims.
MrbResult dual_mrb_forward(ParamStore& store, const DualMrbUnit& blk, const Tensor4& x,
                           const Tensor4* skip, BnMode mode, float eps, float momentum,
                           MrbTape* tape = nullptr);

// Per-pixel class probabilities (n, num_classes, h, w); channel sums are 1.
// Spatial dims must be divisible by 8. Pass a tape only in Train mode.
Tensor4 forward(Network& net, const Tensor4& batch, BnMode mode, NetTape* tape = nullptr);

// Accumulates parameter gradients for the recorded pass and returns them;
// grad_input, when requested, receives the gradient at the network input.
GradStore network_backward(Network& net, NetTape& tape, const Tensor4& grad_probs,
                           Tensor4* grad_input = nullptr);

// Binary mask (values 0/1) from the class-1 probability, threshold 0.5
// (equivalently the per-pixel argmax for two classes).
Tensor4 probs_to_mask(const Tensor4& probs);

}  // namespace ldmres
