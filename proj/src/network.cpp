#include "ldmres/network.hpp"

#include <cmath>

#include "ldmres/rng.hpp"

namespace ldmres {

ConvBnUnit add_conv_bn(ParamStore& store, const std::string& prefix, int k, int cin, int cout) {
    if (cin < 1 || cout < 1)
        throw ConfigError("conv widths must be >= 1 at " + prefix);
    ConvBnUnit u;
    u.k = k;
    u.cin = cin;
    u.cout = cout;
    u.w = store.add(prefix + ".w", Tensor4(cout, cin, k, k), true);
    u.gamma = store.add(prefix + ".bn.gamma", Tensor4(1, cout, 1, 1, 1.0f), true);
    u.beta = store.add(prefix + ".bn.beta", Tensor4(1, cout, 1, 1, 0.0f), true);
    u.rmean = store.add(prefix + ".bn.running_mean", Tensor4(1, cout, 1, 1, 0.0f), false);
    u.rvar = store.add(prefix + ".bn.running_var", Tensor4(1, cout, 1, 1, 1.0f), false);
    return u;
}

DualMrbUnit add_dual_mrb(ParamStore& store, const std::string& prefix, int width) {
    DualMrbUnit b;
    b.width = width;
    b.proj_in = add_conv_bn(store, prefix + ".proj_in", 1, width, width);
    b.s1_k1 = add_conv_bn(store, prefix + ".s1_c1", 1, width, width);
    b.s1_k3 = add_conv_bn(store, prefix + ".s1_c3", 3, width, width);
    b.s2_proj = add_conv_bn(store, prefix + ".s2_c1", 1, width, width);
    b.out_k1 = add_conv_bn(store, prefix + ".out_c1", 1, width, width);
    b.out_k3 = add_conv_bn(store, prefix + ".out_c3", 3, width, width);
    return b;
}

Network build_network(const NetworkConfig& config) {
    if (config.in_channels < 1 || config.num_classes < 2 || config.stem_width < 1 ||
        config.stage_widths[0] < 1 || config.stage_widths[1] < 1 || config.stage_widths[2] < 1)
        throw ConfigError("network widths and class count must be positive (classes >= 2)");

    Network net;
    net.config = config;
    ParamStore& s = net.store;

    net.stem = add_conv_bn(s, "stem", 1, config.in_channels, config.stem_width);

    int prev = config.stem_width;
    for (int i = 0; i < 3; ++i) {
        const int width = config.stage_widths[std::size_t(i)];
        const std::string p = "enc" + std::to_string(i + 1);
        net.enc_transitions[std::size_t(i)].c1 = add_conv_bn(s, p + ".trans.c1", 1, prev, width);
        net.enc_transitions[std::size_t(i)].c3 = add_conv_bn(s, p + ".trans.c3", 3, width, width);
        net.enc_blocks[std::size_t(i)] = add_dual_mrb(s, p + ".block", width);
        prev = width;
    }

    // Decoder mirrors the encoder: block at the current resolution, then an
    // upsample transition down to the next width (back to stem width at the
    // end, so the head's f1 addition always type-checks).
    for (int j = 0; j < 3; ++j) {
        const std::string p = "dec" + std::to_string(j + 1);
        const int width = prev;
        const int next = (j < 2) ? config.stage_widths[std::size_t(1 - j)] : config.stem_width;
        net.dec_blocks[std::size_t(j)] = add_dual_mrb(s, p + ".block", width);
        net.dec_transitions[std::size_t(j)].c1 = add_conv_bn(s, p + ".trans.c1", 1, width, next);
        net.dec_transitions[std::size_t(j)].c3 = add_conv_bn(s, p + ".trans.c3", 3, next, next);
        prev = next;
    }

    net.head.a = add_conv_bn(s, "head.a", 3, config.stem_width, config.stem_width);
    net.head.b = add_conv_bn(s, "head.b", 3, config.stem_width, config.num_classes);

    init_weights(net, config.seed);
    return net;
}

namespace {

template <class Fn>
void for_each_conv_unit(Network& net, Fn&& fn) {
    fn(net.stem);
    for (int i = 0; i < 3; ++i) {
        fn(net.enc_transitions[std::size_t(i)].c1);
        fn(net.enc_transitions[std::size_t(i)].c3);
        for (ConvBnUnit* u : {&net.enc_blocks[std::size_t(i)].proj_in,
                              &net.enc_blocks[std::size_t(i)].s1_k1,
                              &net.enc_blocks[std::size_t(i)].s1_k3,
                              &net.enc_blocks[std::size_t(i)].s2_proj,
                              &net.enc_blocks[std::size_t(i)].out_k1,
                              &net.enc_blocks[std::size_t(i)].out_k3})
            fn(*u);
    }
    for (int j = 0; j < 3; ++j) {
        for (ConvBnUnit* u : {&net.dec_blocks[std::size_t(j)].proj_in,
                              &net.dec_blocks[std::size_t(j)].s1_k1,
                              &net.dec_blocks[std::size_t(j)].s1_k3,
                              &net.dec_blocks[std::size_t(j)].s2_proj,
                              &net.dec_blocks[std::size_t(j)].out_k1,
                              &net.dec_blocks[std::size_t(j)].out_k3})
            fn(*u);
        fn(net.dec_transitions[std::size_t(j)].c1);
        fn(net.dec_transitions[std::size_t(j)].c3);
    }
    fn(net.head.a);
    fn(net.head.b);
}

}  // namespace

void init_weights(Network& net, std::uint64_t seed) {
    Rng rng(seed);
    for_each_conv_unit(net, [&](ConvBnUnit& u) {
        Tensor4& w = net.store.tensor(u.w);
        const double stddev = std::sqrt(2.0 / (double(u.cin) * u.k * u.k));
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] = float(rng.normal() * stddev);
        net.store.tensor(u.gamma).fill(1.0f);
        net.store.tensor(u.beta).fill(0.0f);
        net.store.tensor(u.rmean).fill(0.0f);
        net.store.tensor(u.rvar).fill(1.0f);
    });
    net.config.seed = seed;
}

ParamCounts count_params(const Network& net) {
    ParamCounts c;
    c.trainable = net.store.scalar_count(true);
    c.total = net.store.scalar_count(false);
    return c;
}

// ---- forward ----------------------------------------------------------------

namespace {

Tensor4 conv_bn(ParamStore& s, const ConvBnUnit& u, const Tensor4& x, BnMode mode,
                float eps, float momentum, ConvBnTape* tape) {
    Tensor4 co = conv2d(x, s.tensor(u.w));
    BnStats stats;
    Tensor4 out = batchnorm(co, s.tensor(u.gamma), s.tensor(u.beta),
                            s.tensor(u.rmean), s.tensor(u.rvar),
                            eps, momentum, mode, tape ? &stats : nullptr);
    if (tape) {
        tape->conv_in = x;
        tape->conv_out = std::move(co);
        tape->bn = std::move(stats);
    }
    return out;
}

// Returns the gradient at the unit input and accumulates parameter grads.
Tensor4 conv_bn_backward(ParamStore& s, const ConvBnUnit& u, const ConvBnTape& tape,
                         const Tensor4& grad_out, GradStore& grads) {
    Tensor4 g_conv, g_gamma, g_beta;
    batchnorm_backward(tape.conv_out, s.tensor(u.gamma), tape.bn, grad_out,
                       &g_conv, &g_gamma, &g_beta);
    grads.accumulate(u.gamma, g_gamma);
    grads.accumulate(u.beta, g_beta);
    Tensor4 g_in, g_w;
    conv2d_backward(tape.conv_in, s.tensor(u.w), g_conv, &g_in, &g_w);
    grads.accumulate(u.w, g_w);
    return g_in;
}

}  // namespace

MrbResult dual_mrb_forward(ParamStore& store, const DualMrbUnit& blk, const Tensor4& x,
                           const Tensor4* skip, BnMode mode, float eps, float momentum,
                           MrbTape* tape) {
    if (x.dims().c != blk.width)
        throw ShapeError("dual_mrb_forward: input channels " + std::to_string(x.dims().c) +
                         " != block width " + std::to_string(blk.width));

    auto unit = [&](const ConvBnUnit& u, const Tensor4& in, ConvBnTape* t) {
        return conv_bn(store, u, in, mode, eps, momentum, t);
    };

    Tensor4 s1_pre = add(unit(blk.s1_k1, x, tape ? &tape->s1_k1 : nullptr),
                         unit(blk.s1_k3, x, tape ? &tape->s1_k3 : nullptr));
    if (skip) {
        require_same_shape(s1_pre, *skip, "dual_mrb_forward skip");
        s1_pre = add(s1_pre, *skip);
    }
    Tensor4 s1 = relu(s1_pre);

    Tensor4 s2_pre = add(unit(blk.s2_proj, s1, tape ? &tape->s2_proj : nullptr), s1);
    Tensor4 s2 = relu(s2_pre);

    Tensor4 out = add(unit(blk.proj_in, x, tape ? &tape->proj_in : nullptr),
                      add(unit(blk.out_k1, s2, tape ? &tape->out_k1 : nullptr),
                          unit(blk.out_k3, s2, tape ? &tape->out_k3 : nullptr)));

    if (tape) {
        tape->s1_pre = std::move(s1_pre);
        tape->s2_pre = std::move(s2_pre);
        tape->s2 = std::move(s2);
        tape->has_skip = skip != nullptr;
    }
    return {std::move(out), std::move(s1)};
}

namespace {

// Gradient at the block input; g_skip receives the skip gradient when the
// block was run with one. extra_s1_grad adds the gradient flowing into this
// block's exported s1 from elsewhere in the graph (the decoder's skip use).
Tensor4 dual_mrb_backward(ParamStore& store, const DualMrbUnit& blk, const MrbTape& tape,
                          const Tensor4& grad_out, const Tensor4* extra_s1_grad,
                          GradStore& grads, Tensor4* g_skip) {
    Tensor4 g_x = conv_bn_backward(store, blk.proj_in, tape.proj_in, grad_out, grads);

    Tensor4 g_s2 = add(conv_bn_backward(store, blk.out_k1, tape.out_k1, grad_out, grads),
                       conv_bn_backward(store, blk.out_k3, tape.out_k3, grad_out, grads));
    Tensor4 g_s2pre = relu_backward(tape.s2_pre, g_s2);

    Tensor4 g_s1 = add(g_s2pre,
                       conv_bn_backward(store, blk.s2_proj, tape.s2_proj, g_s2pre, grads));
    if (extra_s1_grad)
        g_s1 = add(g_s1, *extra_s1_grad);

    Tensor4 g_s1pre = relu_backward(tape.s1_pre, g_s1);
    if (g_skip && tape.has_skip)
        *g_skip = g_s1pre;

    g_x = add(g_x, conv_bn_backward(store, blk.s1_k1, tape.s1_k1, g_s1pre, grads));
    g_x = add(g_x, conv_bn_backward(store, blk.s1_k3, tape.s1_k3, g_s1pre, grads));
    return g_x;
}

}  // namespace

Tensor4 forward(Network& net, const Tensor4& batch, BnMode mode, NetTape* tape) {
    const Shape4 d = batch.dims();
    if (d.c != net.config.in_channels)
        throw ShapeError("forward: batch has " + std::to_string(d.c) + " channels, network expects " +
                         std::to_string(net.config.in_channels));
    if (d.h % 8 != 0 || d.w % 8 != 0 || d.h == 0 || d.w == 0)
        throw ShapeError("forward: spatial dims must be divisible by 8, got " + d.str());

    ParamStore& s = net.store;
    const float eps = net.bn_eps, mom = net.bn_momentum;

    Tensor4 stem_pre = conv_bn(s, net.stem, batch, mode, eps, mom, tape ? &tape->stem : nullptr);
    Tensor4 f1 = relu(stem_pre);
    if (tape) tape->stem_relu_in = stem_pre;

    std::array<Tensor4, 3> enc_s1;
    Tensor4 x = f1;
    for (int i = 0; i < 3; ++i) {
        EncTransTape* tt = tape ? &tape->enc_t[std::size_t(i)] : nullptr;
        x = conv_bn(s, net.enc_transitions[std::size_t(i)].c1, x, mode, eps, mom, tt ? &tt->c1 : nullptr);
        x = conv_bn(s, net.enc_transitions[std::size_t(i)].c3, x, mode, eps, mom, tt ? &tt->c3 : nullptr);
        if (tt) tt->relu_in = x;
        x = relu(x);
        if (tt) tt->pool_in_dims = x.dims();
        x = maxpool2x2(x, tt ? &tt->pool_argmax : nullptr);

        MrbResult r = dual_mrb_forward(s, net.enc_blocks[std::size_t(i)], x, nullptr, mode,
                                       eps, mom, tape ? &tape->enc_b[std::size_t(i)] : nullptr);
        x = std::move(r.out);
        enc_s1[std::size_t(i)] = std::move(r.s1);
        if (tape) tape->encoder_stage_dims[std::size_t(i)] = x.dims();
    }

    for (int j = 0; j < 3; ++j) {
        const Tensor4& skip = enc_s1[std::size_t(2 - j)];
        MrbResult r = dual_mrb_forward(s, net.dec_blocks[std::size_t(j)], x, &skip, mode,
                                       eps, mom, tape ? &tape->dec_b[std::size_t(j)] : nullptr);
        x = std::move(r.out);

        DecTransTape* tt = tape ? &tape->dec_t[std::size_t(j)] : nullptr;
        x = upsample2x_nearest(x);
        x = conv_bn(s, net.dec_transitions[std::size_t(j)].c1, x, mode, eps, mom, tt ? &tt->c1 : nullptr);
        x = conv_bn(s, net.dec_transitions[std::size_t(j)].c3, x, mode, eps, mom, tt ? &tt->c3 : nullptr);
        if (tt) tt->relu_in = x;
        x = relu(x);
    }

    Tensor4 ha = conv_bn(s, net.head.a, x, mode, eps, mom, tape ? &tape->head.a : nullptr);
    Tensor4 sum = add(ha, f1);
    Tensor4 hb = conv_bn(s, net.head.b, sum, mode, eps, mom, tape ? &tape->head.b : nullptr);
    if (tape) tape->head.relu_in = hb;
    Tensor4 probs = softmax_channel(relu(hb));
    if (tape) {
        tape->head.probs = probs;
        tape->consumed = false;
    }
    return probs;
}

GradStore network_backward(Network& net, NetTape& tape, const Tensor4& grad_probs,
                           Tensor4* grad_input) {
    if (tape.consumed)
        throw Error("network_backward: tape already consumed");
    tape.consumed = true;

    ParamStore& s = net.store;
    GradStore grads(s);

    Tensor4 g = softmax_backward(tape.head.probs, grad_probs);
    g = relu_backward(tape.head.relu_in, g);
    Tensor4 g_sum = conv_bn_backward(s, net.head.b, tape.head.b, g, grads);
    Tensor4 g_f1 = g_sum;  // f1 also reached through the encoder, added below
    g = conv_bn_backward(s, net.head.a, tape.head.a, g_sum, grads);

    std::array<Tensor4, 3> g_enc_s1;
    for (int j = 2; j >= 0; --j) {
        const DecTransTape& tt = tape.dec_t[std::size_t(j)];
        g = relu_backward(tt.relu_in, g);
        g = conv_bn_backward(s, net.dec_transitions[std::size_t(j)].c3, tt.c3, g, grads);
        g = conv_bn_backward(s, net.dec_transitions[std::size_t(j)].c1, tt.c1, g, grads);
        g = upsample2x_backward(g);

        Tensor4 g_skip;
        g = dual_mrb_backward(s, net.dec_blocks[std::size_t(j)], tape.dec_b[std::size_t(j)],
                              g, nullptr, grads, &g_skip);
        g_enc_s1[std::size_t(2 - j)] = std::move(g_skip);
    }

    for (int i = 2; i >= 0; --i) {
        g = dual_mrb_backward(s, net.enc_blocks[std::size_t(i)], tape.enc_b[std::size_t(i)],
                              g, &g_enc_s1[std::size_t(i)], grads, nullptr);

        const EncTransTape& tt = tape.enc_t[std::size_t(i)];
        g = maxpool2x2_backward(tt.pool_in_dims, tt.pool_argmax, g);
        g = relu_backward(tt.relu_in, g);
        g = conv_bn_backward(s, net.enc_transitions[std::size_t(i)].c3, tt.c3, g, grads);
        g = conv_bn_backward(s, net.enc_transitions[std::size_t(i)].c1, tt.c1, g, grads);
    }

    g_f1 = add(g_f1, g);
    g = relu_backward(tape.stem_relu_in, g_f1);
    Tensor4 g_in = conv_bn_backward(s, net.stem, tape.stem, g, grads);
    if (grad_input) *grad_input = std::move(g_in);
    return grads;
}

Tensor4 probs_to_mask(const Tensor4& probs) {
    const Shape4 d = probs.dims();
    if (d.c != 2)
        throw ShapeError("probs_to_mask: expected 2 channels, got " + d.str());
    Tensor4 mask(d.n, 1, d.h, d.w);
    for (int n = 0; n < d.n; ++n) {
        const float* fg = probs.plane(n, 1);
        float* mp = mask.plane(n, 0);
        for (int i = 0; i < d.h * d.w; ++i)
            mp[i] = fg[i] >= 0.5f ? 1.0f : 0.0f;
    }
    return mask;
}

}  // namespace ldmres
