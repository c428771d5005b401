#include "ldmres/ref_ops.hpp"

#include <cmath>

namespace ldmres::ref {

namespace {

bool inside(int v, int hi) { return v >= 0 && v < hi; }

}  // namespace

Tensor4 conv2d(const Tensor4& input, const Tensor4& weights, const std::vector<float>* bias) {
    const Shape4 id = input.dims();
    const int c_out = weights.dims().n, c_in = weights.dims().c, k = weights.dims().h;
    if (id.c != c_in) throw ShapeError("ref::conv2d: channel mismatch");
    const int pad = k / 2;

    Tensor4 out(id.n, c_out, id.h, id.w);
    for (int n = 0; n < id.n; ++n)
        for (int o = 0; o < c_out; ++o)
            for (int y = 0; y < id.h; ++y)
                for (int x = 0; x < id.w; ++x) {
                    float acc = bias ? (*bias)[o] : 0.0f;
                    for (int i = 0; i < c_in; ++i)
                        for (int dy = 0; dy < k; ++dy)
                            for (int dx = 0; dx < k; ++dx) {
                                const int yy = y + dy - pad, xx = x + dx - pad;
                                if (inside(yy, id.h) && inside(xx, id.w))
                                    acc += weights.at(o, i, dy, dx) * input.at(n, i, yy, xx);
                            }
                    out.at(n, o, y, x) = acc;
                }
    return out;
}

void conv2d_backward(const Tensor4& input, const Tensor4& weights, const Tensor4& grad_out,
                     Tensor4* grad_input, Tensor4* grad_weights, std::vector<float>* grad_bias) {
    const Shape4 id = input.dims();
    const int c_out = weights.dims().n, c_in = weights.dims().c, k = weights.dims().h;
    const int pad = k / 2;

    if (grad_input) *grad_input = Tensor4(id);
    if (grad_weights) *grad_weights = Tensor4(weights.dims());
    if (grad_bias) grad_bias->assign(c_out, 0.0f);

    // Scatter every forward term's contribution to its operands.
    for (int n = 0; n < id.n; ++n)
        for (int o = 0; o < c_out; ++o)
            for (int y = 0; y < id.h; ++y)
                for (int x = 0; x < id.w; ++x) {
                    const float g = grad_out.at(n, o, y, x);
                    if (grad_bias) (*grad_bias)[o] += g;
                    for (int i = 0; i < c_in; ++i)
                        for (int dy = 0; dy < k; ++dy)
                            for (int dx = 0; dx < k; ++dx) {
                                const int yy = y + dy - pad, xx = x + dx - pad;
                                if (!inside(yy, id.h) || !inside(xx, id.w)) continue;
                                if (grad_input)
                                    grad_input->at(n, i, yy, xx) += weights.at(o, i, dy, dx) * g;
                                if (grad_weights)
                                    grad_weights->at(o, i, dy, dx) += input.at(n, i, yy, xx) * g;
                            }
                }
}

Tensor4 batchnorm(const Tensor4& input, const Tensor4& gamma, const Tensor4& beta,
                  Tensor4& running_mean, Tensor4& running_var,
                  float eps, float momentum, BnMode mode, BnStats* stats) {
    const Shape4 id = input.dims();
    const std::int64_t m = std::int64_t(id.n) * id.h * id.w;

    std::vector<float> mean(id.c), inv_std(id.c);
    for (int c = 0; c < id.c; ++c) {
        if (mode == BnMode::Train) {
            double mu = 0.0;
            for (int n = 0; n < id.n; ++n)
                for (int y = 0; y < id.h; ++y)
                    for (int x = 0; x < id.w; ++x)
                        mu += input.at(n, c, y, x);
            mu /= double(m);
            double var = 0.0;
            for (int n = 0; n < id.n; ++n)
                for (int y = 0; y < id.h; ++y)
                    for (int x = 0; x < id.w; ++x) {
                        const double d = input.at(n, c, y, x) - mu;
                        var += d * d;
                    }
            var /= double(m);
            mean[c] = float(mu);
            inv_std[c] = float(1.0 / std::sqrt(var + eps));
            running_mean[c] = momentum * running_mean[c] + (1.0f - momentum) * float(mu);
            running_var[c] = momentum * running_var[c] + (1.0f - momentum) * float(var);
        } else {
            mean[c] = running_mean[c];
            inv_std[c] = float(1.0 / std::sqrt(double(running_var[c]) + eps));
        }
    }

    Tensor4 out(id);
    for (int n = 0; n < id.n; ++n)
        for (int c = 0; c < id.c; ++c)
            for (int y = 0; y < id.h; ++y)
                for (int x = 0; x < id.w; ++x)
                    out.at(n, c, y, x) =
                        (input.at(n, c, y, x) - mean[c]) * inv_std[c] * gamma[c] + beta[c];

    if (stats) {
        stats->mode = mode;
        stats->mean = std::move(mean);
        stats->inv_std = std::move(inv_std);
    }
    return out;
}

void batchnorm_backward(const Tensor4& input, const Tensor4& gamma, const BnStats& stats,
                        const Tensor4& grad_out,
                        Tensor4* grad_input, Tensor4* grad_gamma, Tensor4* grad_beta) {
    const Shape4 id = input.dims();
    const std::int64_t m = std::int64_t(id.n) * id.h * id.w;

    if (grad_gamma) *grad_gamma = Tensor4(1, id.c, 1, 1);
    if (grad_beta) *grad_beta = Tensor4(1, id.c, 1, 1);
    if (grad_input) *grad_input = Tensor4(id);

    for (int c = 0; c < id.c; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (int n = 0; n < id.n; ++n)
            for (int y = 0; y < id.h; ++y)
                for (int x = 0; x < id.w; ++x) {
                    const double g = grad_out.at(n, c, y, x);
                    const double xh = (input.at(n, c, y, x) - stats.mean[c]) * stats.inv_std[c];
                    sum_g += g;
                    sum_gx += g * xh;
                }
        if (grad_beta) (*grad_beta)[c] = float(sum_g);
        if (grad_gamma) (*grad_gamma)[c] = float(sum_gx);
        if (!grad_input) continue;

        for (int n = 0; n < id.n; ++n)
            for (int y = 0; y < id.h; ++y)
                for (int x = 0; x < id.w; ++x) {
                    const double g = grad_out.at(n, c, y, x);
                    const double xh = (input.at(n, c, y, x) - stats.mean[c]) * stats.inv_std[c];
                    double d;
                    if (stats.mode == BnMode::Train)
                        d = gamma[c] * stats.inv_std[c] *
                            (g - sum_g / double(m) - xh * sum_gx / double(m));
                    else
                        d = gamma[c] * stats.inv_std[c] * g;
                    grad_input->at(n, c, y, x) = float(d);
                }
    }
}

Tensor4 relu(const Tensor4& input) {
    Tensor4 out(input.dims());
    for (std::size_t i = 0; i < input.size(); ++i)
        out[i] = input[i] > 0.0f ? input[i] : 0.0f;
    return out;
}

Tensor4 relu_backward(const Tensor4& input, const Tensor4& grad_out) {
    Tensor4 out(input.dims());
    for (std::size_t i = 0; i < input.size(); ++i)
        out[i] = input[i] > 0.0f ? grad_out[i] : 0.0f;
    return out;
}

Tensor4 maxpool2x2(const Tensor4& input, std::vector<std::uint32_t>* argmax) {
    const Shape4 id = input.dims();
    if (id.h % 2 || id.w % 2) throw ShapeError("ref::maxpool2x2: odd spatial dims");
    Tensor4 out(id.n, id.c, id.h / 2, id.w / 2);
    if (argmax) argmax->assign(out.size(), 0);
    for (int n = 0; n < id.n; ++n)
        for (int c = 0; c < id.c; ++c)
            for (int y = 0; y < id.h / 2; ++y)
                for (int x = 0; x < id.w / 2; ++x) {
                    float best = input.at(n, c, 2 * y, 2 * x);
                    std::size_t best_idx = input.index(n, c, 2 * y, 2 * x);
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const float v = input.at(n, c, 2 * y + dy, 2 * x + dx);
                            if (v > best) {
                                best = v;
                                best_idx = input.index(n, c, 2 * y + dy, 2 * x + dx);
                            }
                        }
                    out.at(n, c, y, x) = best;
                    if (argmax) (*argmax)[out.index(n, c, y, x)] = std::uint32_t(best_idx);
                }
    return out;
}

Tensor4 maxpool2x2_backward(const Shape4& input_dims, const std::vector<std::uint32_t>& argmax,
                            const Tensor4& grad_out) {
    Tensor4 out(input_dims);
    for (std::size_t i = 0; i < grad_out.size(); ++i)
        out[argmax[i]] += grad_out[i];
    return out;
}

Tensor4 upsample2x_nearest(const Tensor4& input) {
    const Shape4 id = input.dims();
    Tensor4 out(id.n, id.c, 2 * id.h, 2 * id.w);
    for (int n = 0; n < id.n; ++n)
        for (int c = 0; c < id.c; ++c)
            for (int y = 0; y < 2 * id.h; ++y)
                for (int x = 0; x < 2 * id.w; ++x)
                    out.at(n, c, y, x) = input.at(n, c, y / 2, x / 2);
    return out;
}

Tensor4 upsample2x_backward(const Tensor4& grad_out) {
    const Shape4 gd = grad_out.dims();
    Tensor4 out(gd.n, gd.c, gd.h / 2, gd.w / 2);
    for (int n = 0; n < gd.n; ++n)
        for (int c = 0; c < gd.c; ++c)
            for (int y = 0; y < gd.h; ++y)
                for (int x = 0; x < gd.w; ++x)
                    out.at(n, c, y / 2, x / 2) += grad_out.at(n, c, y, x);
    return out;
}

Tensor4 softmax_channel(const Tensor4& input) {
    const Shape4 id = input.dims();
    Tensor4 out(id);
    for (int n = 0; n < id.n; ++n)
        for (int y = 0; y < id.h; ++y)
            for (int x = 0; x < id.w; ++x) {
                float mx = input.at(n, 0, y, x);
                for (int c = 1; c < id.c; ++c)
                    mx = std::max(mx, input.at(n, c, y, x));
                float denom = 0.0f;
                for (int c = 0; c < id.c; ++c)
                    denom += std::exp(input.at(n, c, y, x) - mx);
                for (int c = 0; c < id.c; ++c)
                    out.at(n, c, y, x) = std::exp(input.at(n, c, y, x) - mx) / denom;
            }
    return out;
}

Tensor4 softmax_backward(const Tensor4& probs, const Tensor4& grad_out) {
    const Shape4 id = probs.dims();
    Tensor4 out(id);
    for (int n = 0; n < id.n; ++n)
        for (int y = 0; y < id.h; ++y)
            for (int x = 0; x < id.w; ++x) {
                float dot = 0.0f;
                for (int c = 0; c < id.c; ++c)
                    dot += probs.at(n, c, y, x) * grad_out.at(n, c, y, x);
                for (int c = 0; c < id.c; ++c)
                    out.at(n, c, y, x) = probs.at(n, c, y, x) * (grad_out.at(n, c, y, x) - dot);
            }
    return out;
}

Tensor4 add(const Tensor4& a, const Tensor4& b) {
    require_same_shape(a, b, "ref::add");
    Tensor4 out(a.dims());
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = a[i] + b[i];
    return out;
}

}  // namespace ldmres::ref
