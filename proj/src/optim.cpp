#include "ldmres/optim.hpp"

#include <cmath>

namespace ldmres {

AdamState::AdamState(const ParamStore& store, AdamHyper hyper) : hyper_(hyper) {
    m_.reserve(std::size_t(store.size()));
    v_.reserve(std::size_t(store.size()));
    trainable_.reserve(std::size_t(store.size()));
    for (int i = 0; i < store.size(); ++i) {
        const bool t = store[i].trainable;
        trainable_.push_back(t);
        m_.emplace_back(t ? Tensor4(store.tensor(i).dims()) : Tensor4());
        v_.emplace_back(t ? Tensor4(store.tensor(i).dims()) : Tensor4());
    }
}

void AdamState::step(ParamStore& store, const GradStore& grads) {
    if (store.size() != int(m_.size()) || grads.size() != int(m_.size()))
        throw ShapeError("adam_step: store/grad size does not match optimizer state");

    ++t_;
    const double bc1 = 1.0 - std::pow(double(hyper_.beta1), double(t_));
    const double bc2 = 1.0 - std::pow(double(hyper_.beta2), double(t_));

    for (int p = 0; p < store.size(); ++p) {
        if (!trainable_[std::size_t(p)]) continue;
        Tensor4& theta = store.tensor(p);
        const Tensor4& g = grads[p];
        require_same_shape(theta, g, "adam_step");
        Tensor4& m = m_[std::size_t(p)];
        Tensor4& v = v_[std::size_t(p)];

        float* tp = theta.data();
        const float* gp = g.data();
        float* mp = m.data();
        float* vp = v.data();
        const std::int64_t n = std::int64_t(theta.size());
        #pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            mp[i] = hyper_.beta1 * mp[i] + (1.0f - hyper_.beta1) * gp[i];
            vp[i] = hyper_.beta2 * vp[i] + (1.0f - hyper_.beta2) * gp[i] * gp[i];
            const float mhat = float(mp[i] / bc1);
            const float vhat = float(vp[i] / bc2);
            tp[i] -= hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps);
        }
    }
}

}  // namespace ldmres
