#pragma once

#include <cstdint>
#include <vector>

#include "ldmres/params.hpp"

namespace ldmres {

struct AdamHyper {
    float lr = 2e-5f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// Standard ADAM with bias correction; first/second moment tensors are kept
// per store entry (non-trainable entries stay empty and untouched).
class AdamState {
public:
    AdamState(const ParamStore& store, AdamHyper hyper);

    // One update over every trainable parameter. grads must be aligned with
    // the store this state was built from.
    void step(ParamStore& store, const GradStore& grads);

    AdamHyper& hyper() { return hyper_; }
    const AdamHyper& hyper() const { return hyper_; }
    std::int64_t steps_taken() const { return t_; }

private:
    AdamHyper hyper_;
    std::int64_t t_ = 0;
    std::vector<Tensor4> m_, v_;
    std::vector<bool> trainable_;
};

}  // namespace ldmres
