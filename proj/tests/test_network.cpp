#include <doctest.h>

#include <cmath>

#include "ldmres/loss.hpp"
#include "ldmres/network.hpp"
#include "test_util.hpp"

using namespace ldmres;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

NetworkConfig reference_config(std::uint64_t seed = 0) {
    NetworkConfig cfg;
    cfg.seed = seed;
    return cfg;
}

// Closed-form per-layer parameter count for the documented architecture,
// summed independently of ParamStore bookkeeping.
long long conv_weights(int k, int cin, int cout) { return 1LL * k * k * cin * cout; }
long long bn_trainable(int c) { return 2LL * c; }
long long block_weights(int c) { return conv_weights(1, c, c) * 4 + conv_weights(3, c, c) * 2; }
long long block_bn(int c) { return 6 * bn_trainable(c); }

long long analytic_trainable(const NetworkConfig& cfg) {
    const int s = cfg.stem_width;
    const auto& w = cfg.stage_widths;
    long long total = conv_weights(1, cfg.in_channels, s) + bn_trainable(s);
    int prev = s;
    for (int i = 0; i < 3; ++i) {
        total += conv_weights(1, prev, w[std::size_t(i)]) + bn_trainable(w[std::size_t(i)]);
        total += conv_weights(3, w[std::size_t(i)], w[std::size_t(i)]) + bn_trainable(w[std::size_t(i)]);
        total += block_weights(w[std::size_t(i)]) + block_bn(w[std::size_t(i)]);
        prev = w[std::size_t(i)];
    }
    const int dec_next[3] = {w[1], w[0], s};
    for (int j = 0; j < 3; ++j) {
        total += block_weights(prev) + block_bn(prev);
        total += conv_weights(1, prev, dec_next[j]) + bn_trainable(dec_next[j]);
        total += conv_weights(3, dec_next[j], dec_next[j]) + bn_trainable(dec_next[j]);
        prev = dec_next[j];
    }
    total += conv_weights(3, s, s) + bn_trainable(s);
    total += conv_weights(3, s, cfg.num_classes) + bn_trainable(cfg.num_classes);
    return total;
}

// Every BN contributes as many running-statistic scalars as trainable ones.
long long analytic_total(const NetworkConfig& cfg) {
    Network net = build_network(cfg);
    long long bn_running = 0;
    for (const Param& p : net.store)
        if (!p.trainable) bn_running += p.value.dims().numel();
    return analytic_trainable(cfg) + bn_running;
}

// Frozen golden for the reference configuration (stem 8, stages 8/16/32).
constexpr long long kGoldenTrainable = 78572;
constexpr long long kGoldenTotal = 80304;

DualMrbUnit make_random_block(ParamStore& store, int width, Rng& rng) {
    DualMrbUnit blk = add_dual_mrb(store, "blk", width);
    for (int i = 0; i < store.size(); ++i) {
        Tensor4& t = store.tensor(i);
        const std::string& name = store[i].name;
        for (std::size_t k = 0; k < t.size(); ++k) {
            if (name.ends_with(".w"))
                t[k] = float(rng.normal() * 0.3);
            else if (name.ends_with("gamma"))
                t[k] = float(rng.uniform(0.5, 1.5));
            else if (name.ends_with("beta"))
                t[k] = float(rng.uniform(-0.3, 0.3));
            else if (name.ends_with("running_mean"))
                t[k] = float(rng.uniform(-0.2, 0.2));
            else
                t[k] = float(rng.uniform(0.5, 1.5));
        }
    }
    return blk;
}

}  // namespace

TEST_CASE("parameter count matches the analytic closed form and the golden") {
    Network net = build_network(reference_config());
    const ParamCounts c = count_params(net);
    CHECK(c.trainable == analytic_trainable(net.config));
    CHECK(c.total == analytic_total(net.config));
    CHECK(c.trainable == kGoldenTrainable);
    CHECK(c.total == kGoldenTotal);
    CHECK(c.trainable >= 60000);
    CHECK(c.trainable <= 90000);
}

TEST_CASE("count_params closed forms for single units") {
    ParamStore store;
    ConvBnUnit u = add_conv_bn(store, "conv", 3, 4, 6);
    CHECK(store.tensor(u.w).dims().numel() == 3 * 3 * 4 * 6);
    // One BN over C channels: 2C trainable + 2C running.
    long long trainable = 0, total = 0;
    for (const Param& p : store) {
        total += p.value.dims().numel();
        if (p.trainable) trainable += p.value.dims().numel();
    }
    CHECK(trainable == 3 * 3 * 4 * 6 + 2 * 6);
    CHECK(total == trainable + 2 * 6);
}

TEST_CASE("count_params does not depend on input size") {
    Network net = build_network(reference_config(3));
    const ParamCounts before = count_params(net);
    Rng rng(4);
    forward(net, random_tensor({1, 3, 16, 16}, rng), BnMode::Infer);
    forward(net, random_tensor({1, 3, 32, 32}, rng), BnMode::Infer);
    const ParamCounts after = count_params(net);
    CHECK(before.trainable == after.trainable);
    CHECK(before.total == after.total);
}

TEST_CASE("minimal network builds and runs") {
    NetworkConfig cfg;
    cfg.stem_width = 1;
    cfg.stage_widths = {1, 1, 1};
    cfg.seed = 5;
    Network net = build_network(cfg);
    Rng rng(6);
    Tensor4 out = forward(net, random_tensor({1, 3, 16, 16}, rng), BnMode::Infer);
    CHECK(out.dims() == Shape4{1, 2, 16, 16});
}

TEST_CASE("zero widths are rejected") {
    NetworkConfig cfg;
    cfg.stage_widths = {8, 0, 16};
    CHECK_THROWS_AS(build_network(cfg), ConfigError);
}

TEST_CASE("forward shape contract and divisibility error") {
    Network net = build_network(reference_config(7));
    Rng rng(8);
    Tensor4 out = forward(net, random_tensor({1, 3, 64, 64}, rng), BnMode::Infer);
    CHECK(out.dims() == Shape4{1, 2, 64, 64});

    Tensor4 wide = forward(net, random_tensor({2, 3, 16, 40}, rng), BnMode::Infer);
    CHECK(wide.dims() == Shape4{2, 2, 16, 40});

    try {
        forward(net, random_tensor({1, 3, 10, 10}, rng), BnMode::Infer);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("divisible by 8") != std::string::npos);
    }
}

TEST_CASE("per-pixel channel sums are 1") {
    Network net = build_network(reference_config(9));
    Rng rng(10);
    Tensor4 probs = forward(net, random_tensor({2, 3, 16, 16}, rng), BnMode::Train);
    const Shape4 d = probs.dims();
    for (int n = 0; n < d.n; ++n)
        for (int y = 0; y < d.h; ++y)
            for (int x = 0; x < d.w; ++x)
                CHECK(std::fabs(probs.at(n, 0, y, x) + probs.at(n, 1, y, x) - 1.0) <= 1e-6);
}

TEST_CASE("encoder pyramid dims are H/2, H/4, H/8") {
    Network net = build_network(reference_config(11));
    Rng rng(12);
    for (int hw : {16, 24, 64}) {
        NetTape tape;
        Tensor4 out = forward(net, random_tensor({1, 3, hw, hw}, rng), BnMode::Train, &tape);
        CHECK(out.dims() == Shape4{1, 2, hw, hw});
        for (int i = 0; i < 3; ++i) {
            const int div = 2 << i;
            CHECK(tape.encoder_stage_dims[std::size_t(i)] ==
                  Shape4{1, net.config.stage_widths[std::size_t(i)], hw / div, hw / div});
        }
    }
}

TEST_CASE("same seed gives bit-identical builds and outputs") {
    Network a = build_network(reference_config(42));
    Network b = build_network(reference_config(42));
    REQUIRE(a.store.size() == b.store.size());
    for (int i = 0; i < a.store.size(); ++i) {
        CHECK(a.store[i].name == b.store[i].name);
        CHECK(a.store.tensor(i) == b.store.tensor(i));
    }

    Rng rng(13);
    Tensor4 x = random_tensor({1, 3, 16, 16}, rng);
    Tensor4 p1 = forward(a, x, BnMode::Infer);
    Tensor4 p2 = forward(b, x, BnMode::Infer);
    CHECK(p1 == p2);
}

TEST_CASE("different seeds differ somewhere") {
    Network a = build_network(reference_config(1));
    Network b = build_network(reference_config(2));
    bool any_diff = false;
    for (int i = 0; i < a.store.size() && !any_diff; ++i)
        any_diff = !(a.store.tensor(i) == b.store.tensor(i));
    CHECK(any_diff);
}

TEST_CASE("init weight spread approximates sqrt(2/fan_in)") {
    Network net = build_network(reference_config(21));
    const int idx = net.store.find("enc3.trans.c3.w");
    REQUIRE(idx >= 0);
    const Tensor4& w = net.store.tensor(idx);
    REQUIRE(w.dims() == Shape4{32, 32, 3, 3});
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        sum += w[i];
        sq += double(w[i]) * w[i];
    }
    const double mean = sum / double(w.size());
    const double sd = std::sqrt(sq / double(w.size()) - mean * mean);
    const double expect = std::sqrt(2.0 / 288.0);
    CHECK(sd > expect * 0.8);
    CHECK(sd < expect * 1.2);
}

TEST_CASE("dual MRB zero gamma/beta annihilates the output") {
    ParamStore store;
    DualMrbUnit blk = add_dual_mrb(store, "blk", 4);
    Rng rng(14);
    for (int i = 0; i < store.size(); ++i) {
        const std::string& name = store[i].name;
        Tensor4& t = store.tensor(i);
        if (name.ends_with(".w"))
            for (std::size_t k = 0; k < t.size(); ++k) t[k] = float(rng.normal());
        if (name.ends_with("gamma") || name.ends_with("beta")) t.fill(0.0f);
    }
    Tensor4 x = random_tensor({1, 4, 6, 6}, rng);
    MrbResult r = dual_mrb_forward(store, blk, x, nullptr, BnMode::Infer, 1e-5f, 0.9f);
    for (std::size_t i = 0; i < r.out.size(); ++i)
        CHECK(r.out[i] == 0.0f);
}

TEST_CASE("dual MRB matches the straight-line oracle") {
    Rng rng(15);
    for (int width : {3, 8}) {
        for (BnMode mode : {BnMode::Infer, BnMode::Train}) {
            ParamStore store;
            DualMrbUnit blk = make_random_block(store, width, rng);
            Tensor4 x = random_tensor({2, width, 8, 8}, rng);
            Tensor4 skip = random_tensor(x.dims(), rng);

            for (const Tensor4* sk : {(const Tensor4*)nullptr, (const Tensor4*)&skip}) {
                ParamStore s1 = store, s2 = store;
                MrbResult got = dual_mrb_forward(s1, blk, x, sk, mode, 1e-5f, 0.9f);
                Tensor4 oracle_s1;
                Tensor4 want = testutil::straight_line_mrb(s2, blk, x, sk, mode, 1e-5f, 0.9f,
                                                           &oracle_s1);
                CHECK(max_abs_diff(got.out, want) <= 1e-5);
                CHECK(max_abs_diff(got.s1, oracle_s1) <= 1e-5);
            }
        }
    }
}

TEST_CASE("dual MRB zero skip equals no skip") {
    Rng rng(16);
    ParamStore store;
    DualMrbUnit blk = make_random_block(store, 4, rng);
    Tensor4 x = random_tensor({1, 4, 6, 6}, rng);
    Tensor4 zero(x.dims());
    ParamStore sa = store, sb = store;
    MrbResult a = dual_mrb_forward(sa, blk, x, nullptr, BnMode::Infer, 1e-5f, 0.9f);
    MrbResult b = dual_mrb_forward(sb, blk, x, &zero, BnMode::Infer, 1e-5f, 0.9f);
    CHECK(max_abs_diff(a.out, b.out) == 0.0);
}

TEST_CASE("dual MRB width mismatch") {
    ParamStore store;
    DualMrbUnit blk = add_dual_mrb(store, "blk", 4);
    Tensor4 x(1, 3, 6, 6, 1.0f);
    CHECK_THROWS_AS(dual_mrb_forward(store, blk, x, nullptr, BnMode::Infer, 1e-5f, 0.9f),
                    ShapeError);
}

TEST_CASE("whole-network forward matches the double-precision pipeline oracle") {
    Network net = build_network(reference_config(17));
    Rng rng(18);
    Tensor4 x = random_tensor({1, 3, 16, 16}, rng);
    Tensor4 mask(1, 1, 16, 16);
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = rng.coin() ? 1.0f : 0.0f;
    Tensor4 target = mask_to_onehot(mask);

    NetTape tape;
    Tensor4 probs = forward(net, x, BnMode::Train, &tape);
    const double loss = dice_loss(probs, target).loss;

    const double loss_d = testutil::network_dice_loss_d(net, testutil::params_to_d(net),
                                                        testutil::to_d(x), testutil::to_d(target));
    CHECK(std::fabs(loss - loss_d) <= 1e-4);
}

TEST_CASE("whole-network parameter gradients match finite differences") {
    Network net = build_network(reference_config(19));
    Rng rng(20);
    Tensor4 x = random_tensor({1, 3, 16, 16}, rng);
    Tensor4 mask(1, 1, 16, 16);
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = rng.coin() ? 1.0f : 0.0f;
    Tensor4 target = mask_to_onehot(mask);

    NetTape tape;
    Tensor4 probs = forward(net, x, BnMode::Train, &tape);
    Tensor4 grad_input;
    GradStore grads = network_backward(net, tape, dice_loss(probs, target).grad_probs,
                                       &grad_input);

    const std::vector<testutil::TensorD> params = testutil::params_to_d(net);
    const testutil::TensorD xd = testutil::to_d(x);
    const testutil::TensorD td = testutil::to_d(target);

    // Sample coordinates across the trainable tensors. The step is small
    // because the probe runs in double precision and the normalized loss
    // surface is strongly curved; 1e-5 sits past the truncation knee.
    const double h = 1e-5;
    double worst = 0.0;
    int checked = 0;
    while (checked < 60) {
        const int p = int(rng.next_below(std::uint64_t(net.store.size())));
        if (!net.store[p].trainable) continue;
        const std::size_t i = std::size_t(rng.next_below(net.store.tensor(p).size()));

        std::vector<testutil::TensorD> pp = params;
        pp[std::size_t(p)].data[i] += h;
        const double up = testutil::network_dice_loss_d(net, pp, xd, td);
        pp[std::size_t(p)].data[i] -= 2 * h;
        const double down = testutil::network_dice_loss_d(net, pp, xd, td);

        const double fd = (up - down) / (2 * h);
        worst = std::max(worst, testutil::grad_rel_err(double(grads[p][i]), fd));
        ++checked;
    }
    CHECK(worst <= 1e-2);

    // Gradient at the network input, same oracle.
    double worst_in = 0.0;
    for (int k = 0; k < 20; ++k) {
        const std::size_t i = std::size_t(rng.next_below(x.size()));
        testutil::TensorD xp = xd, xm = xd;
        xp.data[i] += h;
        xm.data[i] -= h;
        const double fd = (testutil::network_dice_loss_d(net, params, xp, td) -
                           testutil::network_dice_loss_d(net, params, xm, td)) /
                          (2 * h);
        worst_in = std::max(worst_in, testutil::grad_rel_err(double(grad_input[i]), fd));
    }
    CHECK(worst_in <= 1e-2);
}

TEST_CASE("tape is consumed exactly once") {
    Network net = build_network(reference_config(22));
    Rng rng(23);
    Tensor4 x = random_tensor({1, 3, 16, 16}, rng);
    NetTape tape;
    Tensor4 probs = forward(net, x, BnMode::Train, &tape);
    Tensor4 g(probs.dims(), 1.0f);
    network_backward(net, tape, g);
    CHECK_THROWS_AS(network_backward(net, tape, g), Error);
}
