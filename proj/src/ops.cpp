#include "ldmres/ops.hpp"

#include <algorithm>
#include <cmath>

namespace ldmres {

namespace {

void require_finite(const Tensor4& t, const char* what) {
    if (!t.all_finite())
        throw NumericError(std::string(what) + ": non-finite input value");
}

void check_conv_args(const Tensor4& input, const Tensor4& weights,
                     const std::vector<float>* bias) {
    const Shape4& wd = weights.dims();
    if (wd.h != wd.w || wd.h < 1 || wd.h > 3)
        throw ShapeError("conv2d: kernel must be square with k in {1,2,3}, got " + wd.str());
    if (input.dims().c != wd.c)
        throw ShapeError("conv2d: input channels " + std::to_string(input.dims().c) +
                         " != weight c_in " + std::to_string(wd.c));
    if (bias && int(bias->size()) != wd.n)
        throw ShapeError("conv2d: bias length " + std::to_string(bias->size()) +
                         " != c_out " + std::to_string(wd.n));
}

}  // namespace

Tensor4 conv2d(const Tensor4& input, const Tensor4& weights, const std::vector<float>* bias) {
    check_conv_args(input, weights, bias);
    require_finite(input, "conv2d");

    const Shape4 id = input.dims();
    const int c_out = weights.dims().n, c_in = weights.dims().c, k = weights.dims().h;
    const int pad = k / 2;
    const int h = id.h, w = id.w;

    Tensor4 out(id.n, c_out, h, w);

    // One (n, o) output plane per iteration; each output element is summed
    // serially in a fixed order, so the result does not depend on the thread
    // count.
    #pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < id.n; ++n) {
        for (int o = 0; o < c_out; ++o) {
            float* op = out.plane(n, o);
            const float b = bias ? (*bias)[o] : 0.0f;
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    float acc = b;
                    for (int i = 0; i < c_in; ++i) {
                        const float* ip = input.plane(n, i);
                        const float* wp = weights.plane(o, i);
                        for (int dy = 0; dy < k; ++dy) {
                            const int yy = y + dy - pad;
                            if (yy < 0 || yy >= h) continue;
                            for (int dx = 0; dx < k; ++dx) {
                                const int xx = x + dx - pad;
                                if (xx < 0 || xx >= w) continue;
                                acc += wp[dy * k + dx] * ip[yy * w + xx];
                            }
                        }
                    }
                    op[y * w + x] = acc;
                }
            }
        }
    }
    return out;
}

void conv2d_backward(const Tensor4& input, const Tensor4& weights, const Tensor4& grad_out,
                     Tensor4* grad_input, Tensor4* grad_weights, std::vector<float>* grad_bias) {
    check_conv_args(input, weights, nullptr);
    const Shape4 id = input.dims();
    const int c_out = weights.dims().n, c_in = weights.dims().c, k = weights.dims().h;
    const int pad = k / 2;
    const int h = id.h, w = id.w;
    if (!(grad_out.dims() == Shape4{id.n, c_out, h, w}))
        throw ShapeError("conv2d_backward: grad_out dims " + grad_out.dims().str());
    require_finite(grad_out, "conv2d_backward");

    if (grad_input) {
        *grad_input = Tensor4(id);
        // gin[n,i,y,x] = sum_{o,dy,dx} w[o,i,dy,dx] * gout[n,o,y-dy+pad,x-dx+pad]
        #pragma omp parallel for collapse(2) schedule(static)
        for (int n = 0; n < id.n; ++n) {
            for (int i = 0; i < c_in; ++i) {
                float* gp = grad_input->plane(n, i);
                for (int y = 0; y < h; ++y) {
                    for (int x = 0; x < w; ++x) {
                        float acc = 0.0f;
                        for (int o = 0; o < c_out; ++o) {
                            const float* gop = grad_out.plane(n, o);
                            const float* wp = weights.plane(o, i);
                            for (int dy = 0; dy < k; ++dy) {
                                const int yy = y - dy + pad;
                                if (yy < 0 || yy >= h) continue;
                                for (int dx = 0; dx < k; ++dx) {
                                    const int xx = x - dx + pad;
                                    if (xx < 0 || xx >= w) continue;
                                    acc += wp[dy * k + dx] * gop[yy * w + xx];
                                }
                            }
                        }
                        gp[y * w + x] = acc;
                    }
                }
            }
        }
    }

    if (grad_weights) {
        *grad_weights = Tensor4(weights.dims());
        // Each (o, i) weight tile is owned by one thread; the n,y,x reduction
        // order inside it is fixed.
        #pragma omp parallel for collapse(2) schedule(static)
        for (int o = 0; o < c_out; ++o) {
            for (int i = 0; i < c_in; ++i) {
                float* gw = grad_weights->plane(o, i);
                for (int dy = 0; dy < k; ++dy) {
                    for (int dx = 0; dx < k; ++dx) {
                        float acc = 0.0f;
                        for (int n = 0; n < id.n; ++n) {
                            const float* gop = grad_out.plane(n, o);
                            const float* ip = input.plane(n, i);
                            const int y0 = std::max(0, pad - dy);
                            const int y1 = std::min(h, h + pad - dy);
                            const int x0 = std::max(0, pad - dx);
                            const int x1 = std::min(w, w + pad - dx);
                            for (int y = y0; y < y1; ++y) {
                                const float* grow = gop + y * w;
                                const float* irow = ip + (y + dy - pad) * w + (dx - pad);
                                for (int x = x0; x < x1; ++x)
                                    acc += grow[x] * irow[x];
                            }
                        }
                        gw[dy * k + dx] = acc;
                    }
                }
            }
        }
    }

    if (grad_bias) {
        grad_bias->assign(c_out, 0.0f);
        #pragma omp parallel for schedule(static)
        for (int o = 0; o < c_out; ++o) {
            float acc = 0.0f;
            for (int n = 0; n < id.n; ++n) {
                const float* gop = grad_out.plane(n, o);
                for (int p = 0; p < h * w; ++p) acc += gop[p];
            }
            (*grad_bias)[o] = acc;
        }
    }
}

// ---- batch normalization ----------------------------------------------------

namespace {

void check_bn_args(const Tensor4& input, const Tensor4& gamma, const Tensor4& beta,
                   const Tensor4& rmean, const Tensor4& rvar) {
    const int c = input.dims().c;
    for (const Tensor4* v : {&gamma, &beta, &rmean, &rvar}) {
        if (!(v->dims() == Shape4{1, c, 1, 1}))
            throw ShapeError("batchnorm: parameter dims " + v->dims().str() +
                             " do not match " + std::to_string(c) + " channels");
    }
}

}  // namespace

Tensor4 batchnorm(const Tensor4& input, const Tensor4& gamma, const Tensor4& beta,
                  Tensor4& running_mean, Tensor4& running_var,
                  float eps, float momentum, BnMode mode, BnStats* stats) {
    check_bn_args(input, gamma, beta, running_mean, running_var);

    const Shape4 id = input.dims();
    const int c = id.c;
    const std::int64_t m = std::int64_t(id.n) * id.h * id.w;  // elements per channel
    const int plane = id.h * id.w;

    std::vector<float> mean(c), inv_std(c);

    if (mode == BnMode::Train) {
        #pragma omp parallel for schedule(static)
        for (int ch = 0; ch < c; ++ch) {
            double sum = 0.0, sq = 0.0;
            for (int n = 0; n < id.n; ++n) {
                const float* p = input.plane(n, ch);
                for (int i = 0; i < plane; ++i) {
                    sum += p[i];
                    sq += double(p[i]) * p[i];
                }
            }
            const double mu = sum / double(m);
            const double var = std::max(0.0, sq / double(m) - mu * mu);  // biased
            mean[ch] = float(mu);
            inv_std[ch] = float(1.0 / std::sqrt(var + eps));
            running_mean[ch] = momentum * running_mean[ch] + (1.0f - momentum) * float(mu);
            running_var[ch] = momentum * running_var[ch] + (1.0f - momentum) * float(var);
        }
    } else {
        for (int ch = 0; ch < c; ++ch) {
            mean[ch] = running_mean[ch];
            inv_std[ch] = float(1.0 / std::sqrt(double(running_var[ch]) + eps));
        }
    }

    Tensor4 out(id);
    #pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < id.n; ++n) {
        for (int ch = 0; ch < c; ++ch) {
            const float* ip = input.plane(n, ch);
            float* op = out.plane(n, ch);
            const float mu = mean[ch], is = inv_std[ch];
            const float g = gamma[ch], b = beta[ch];
            for (int i = 0; i < plane; ++i)
                op[i] = (ip[i] - mu) * is * g + b;
        }
    }

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
    require_same_shape(input, grad_out, "batchnorm_backward");
    const Shape4 id = input.dims();
    const int c = id.c;
    if (int(stats.mean.size()) != c || int(stats.inv_std.size()) != c)
        throw ShapeError("batchnorm_backward: stats channel count mismatch");

    const int plane = id.h * id.w;
    const std::int64_t m = std::int64_t(id.n) * plane;

    if (grad_gamma) *grad_gamma = Tensor4(1, c, 1, 1);
    if (grad_beta) *grad_beta = Tensor4(1, c, 1, 1);
    if (grad_input) *grad_input = Tensor4(id);

    #pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        const float mu = stats.mean[ch], is = stats.inv_std[ch];
        double sum_g = 0.0, sum_gx = 0.0;  // sum(gout), sum(gout * xhat)
        for (int n = 0; n < id.n; ++n) {
            const float* gp = grad_out.plane(n, ch);
            const float* ip = input.plane(n, ch);
            for (int i = 0; i < plane; ++i) {
                sum_g += gp[i];
                sum_gx += double(gp[i]) * ((ip[i] - mu) * is);
            }
        }
        if (grad_beta) (*grad_beta)[ch] = float(sum_g);
        if (grad_gamma) (*grad_gamma)[ch] = float(sum_gx);

        if (!grad_input) continue;
        const float g_is = gamma[ch] * is;
        if (stats.mode == BnMode::Train) {
            // x participates in the batch mean and variance, hence the two
            // centering terms.
            const float mg = float(sum_g / double(m));
            const float mgx = float(sum_gx / double(m));
            for (int n = 0; n < id.n; ++n) {
                const float* gp = grad_out.plane(n, ch);
                const float* ip = input.plane(n, ch);
                float* dp = grad_input->plane(n, ch);
                for (int i = 0; i < plane; ++i) {
                    const float xhat = (ip[i] - mu) * is;
                    dp[i] = g_is * (gp[i] - mg - xhat * mgx);
                }
            }
        } else {
            for (int n = 0; n < id.n; ++n) {
                const float* gp = grad_out.plane(n, ch);
                float* dp = grad_input->plane(n, ch);
                for (int i = 0; i < plane; ++i)
                    dp[i] = g_is * gp[i];
            }
        }
    }
}

// ---- pointwise and pooling --------------------------------------------------

Tensor4 relu(const Tensor4& input) {
    Tensor4 out(input.dims());
    const std::int64_t n = std::int64_t(input.size());
    float* op = out.data();
    const float* ip = input.data();
    #pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        op[i] = ip[i] > 0.0f ? ip[i] : 0.0f;
    return out;
}

Tensor4 relu_backward(const Tensor4& input, const Tensor4& grad_out) {
    require_same_shape(input, grad_out, "relu_backward");
    Tensor4 out(input.dims());
    const std::int64_t n = std::int64_t(input.size());
    float* op = out.data();
    const float* ip = input.data();
    const float* gp = grad_out.data();
    #pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        op[i] = ip[i] > 0.0f ? gp[i] : 0.0f;
    return out;
}

Tensor4 maxpool2x2(const Tensor4& input, std::vector<std::uint32_t>* argmax) {
    const Shape4 id = input.dims();
    if (id.h % 2 != 0 || id.w % 2 != 0)
        throw ShapeError("maxpool2x2: spatial dims must be even, got " + id.str());

    const int oh = id.h / 2, ow = id.w / 2;
    Tensor4 out(id.n, id.c, oh, ow);
    if (argmax) argmax->assign(out.size(), 0);

    #pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < id.n; ++n) {
        for (int c = 0; c < id.c; ++c) {
            const float* ip = input.plane(n, c);
            float* op = out.plane(n, c);
            const std::size_t in_base = input.index(n, c, 0, 0);
            const std::size_t out_base = out.index(n, c, 0, 0);
            for (int y = 0; y < oh; ++y) {
                for (int x = 0; x < ow; ++x) {
                    // Ties keep the first element in row-major order (>).
                    int by = 2 * y, bx = 2 * x;
                    int best = by * id.w + bx;
                    float bv = ip[best];
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const int idx = (by + dy) * id.w + (bx + dx);
                            if (ip[idx] > bv) {
                                bv = ip[idx];
                                best = idx;
                            }
                        }
                    op[y * ow + x] = bv;
                    if (argmax)
                        (*argmax)[out_base + y * ow + x] = std::uint32_t(in_base + best);
                }
            }
        }
    }
    return out;
}

Tensor4 maxpool2x2_backward(const Shape4& input_dims, const std::vector<std::uint32_t>& argmax,
                            const Tensor4& grad_out) {
    if (argmax.size() != grad_out.size())
        throw ShapeError("maxpool2x2_backward: argmax record size mismatch");
    Tensor4 out(input_dims);
    // Windows are disjoint, so each input cell receives at most one write;
    // parallelizing over output elements is race-free.
    const std::int64_t n = std::int64_t(grad_out.size());
    float* op = out.data();
    const float* gp = grad_out.data();
    #pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        op[argmax[i]] = gp[i];
    return out;
}

Tensor4 upsample2x_nearest(const Tensor4& input) {
    const Shape4 id = input.dims();
    Tensor4 out(id.n, id.c, id.h * 2, id.w * 2);
    #pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < id.n; ++n) {
        for (int c = 0; c < id.c; ++c) {
            const float* ip = input.plane(n, c);
            float* op = out.plane(n, c);
            for (int y = 0; y < 2 * id.h; ++y) {
                const float* irow = ip + (y / 2) * id.w;
                float* orow = op + y * 2 * id.w;
                for (int x = 0; x < 2 * id.w; ++x)
                    orow[x] = irow[x / 2];
            }
        }
    }
    return out;
}

Tensor4 upsample2x_backward(const Tensor4& grad_out) {
    const Shape4 gd = grad_out.dims();
    if (gd.h % 2 != 0 || gd.w % 2 != 0)
        throw ShapeError("upsample2x_backward: grad dims must be even, got " + gd.str());
    Tensor4 out(gd.n, gd.c, gd.h / 2, gd.w / 2);
    #pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < gd.n; ++n) {
        for (int c = 0; c < gd.c; ++c) {
            const float* gp = grad_out.plane(n, c);
            float* op = out.plane(n, c);
            for (int y = 0; y < gd.h / 2; ++y) {
                for (int x = 0; x < gd.w / 2; ++x) {
                    op[y * (gd.w / 2) + x] = gp[(2 * y) * gd.w + 2 * x] +
                                             gp[(2 * y) * gd.w + 2 * x + 1] +
                                             gp[(2 * y + 1) * gd.w + 2 * x] +
                                             gp[(2 * y + 1) * gd.w + 2 * x + 1];
                }
            }
        }
    }
    return out;
}

Tensor4 softmax_channel(const Tensor4& input) {
    const Shape4 id = input.dims();
    if (id.c < 2)
        throw ShapeError("softmax_channel: need at least 2 channels, got " + id.str());
    Tensor4 out(id);
    const int plane = id.h * id.w;
    #pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < id.n; ++n) {
        for (int p = 0; p < plane; ++p) {
            float mx = input.plane(n, 0)[p];
            for (int c = 1; c < id.c; ++c)
                mx = std::max(mx, input.plane(n, c)[p]);
            float denom = 0.0f;
            for (int c = 0; c < id.c; ++c) {
                const float e = std::exp(input.plane(n, c)[p] - mx);
                out.plane(n, c)[p] = e;
                denom += e;
            }
            for (int c = 0; c < id.c; ++c)
                out.plane(n, c)[p] /= denom;
        }
    }
    return out;
}

Tensor4 softmax_backward(const Tensor4& probs, const Tensor4& grad_out) {
    require_same_shape(probs, grad_out, "softmax_backward");
    const Shape4 id = probs.dims();
    Tensor4 out(id);
    const int plane = id.h * id.w;
    #pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < id.n; ++n) {
        for (int p = 0; p < plane; ++p) {
            float dot = 0.0f;
            for (int c = 0; c < id.c; ++c)
                dot += probs.plane(n, c)[p] * grad_out.plane(n, c)[p];
            for (int c = 0; c < id.c; ++c)
                out.plane(n, c)[p] = probs.plane(n, c)[p] * (grad_out.plane(n, c)[p] - dot);
        }
    }
    return out;
}

Tensor4 add(const Tensor4& a, const Tensor4& b) {
    require_same_shape(a, b, "add");
    Tensor4 out(a.dims());
    const std::int64_t n = std::int64_t(a.size());
    float* op = out.data();
    const float* ap = a.data();
    const float* bp = b.data();
    #pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        op[i] = ap[i] + bp[i];
    return out;
}

}  // namespace ldmres
