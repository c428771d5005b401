#include "ldmres/loss.hpp"

namespace ldmres {

static constexpr double kDiceEps = 1.0;

DiceResult dice_loss(const Tensor4& probs, const Tensor4& target) {
    require_same_shape(probs, target, "dice_loss");
    const Shape4 d = probs.dims();
    if (d.c != 2)
        throw ShapeError("dice_loss: expected 2 channels, got " + d.str());

    double inter = 0.0, psum = 0.0, gsum = 0.0;
    for (int n = 0; n < d.n; ++n) {
        const float* p = probs.plane(n, 1);
        const float* g = target.plane(n, 1);
        for (int i = 0; i < d.h * d.w; ++i) {
            inter += double(p[i]) * g[i];
            psum += p[i];
            gsum += g[i];
        }
    }

    const double num = 2.0 * inter + kDiceEps;
    const double den = psum + gsum + kDiceEps;

    DiceResult r;
    r.loss = 1.0 - num / den;
    r.grad_probs = Tensor4(d);
    // d loss / d p_i = -(2*g_i*den - num) / den^2 on the foreground channel.
    const double den2 = den * den;
    for (int n = 0; n < d.n; ++n) {
        const float* g = target.plane(n, 1);
        float* gp = r.grad_probs.plane(n, 1);
        for (int i = 0; i < d.h * d.w; ++i)
            gp[i] = float(-(2.0 * g[i] * den - num) / den2);
    }
    return r;
}

Tensor4 mask_to_onehot(const Tensor4& mask) {
    const Shape4 d = mask.dims();
    if (d.c != 1)
        throw ShapeError("mask_to_onehot: expected 1 channel, got " + d.str());
    Tensor4 out(d.n, 2, d.h, d.w);
    for (int n = 0; n < d.n; ++n) {
        const float* m = mask.plane(n, 0);
        float* bg = out.plane(n, 0);
        float* fg = out.plane(n, 1);
        for (int i = 0; i < d.h * d.w; ++i) {
            fg[i] = m[i] != 0.0f ? 1.0f : 0.0f;
            bg[i] = 1.0f - fg[i];
        }
    }
    return out;
}

}  // namespace ldmres
