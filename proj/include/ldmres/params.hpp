#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldmres/tensor.hpp"

namespace ldmres {

struct Param {
    std::string name;
    Tensor4 value;
    bool trainable = true;
};

// Named, ordered collection of parameter tensors. Layers hold integer
// handles into the store; iteration order is the construction order and is
// the canonical order for initialization, optimizer state, and the weight
// file.
class ParamStore {
public:
    int add(std::string name, Tensor4 value, bool trainable) {
        if (find(name) >= 0)
            throw ConfigError("duplicate parameter name: " + name);
        items_.push_back({std::move(name), std::move(value), trainable});
        return int(items_.size()) - 1;
    }

    int size() const { return int(items_.size()); }

    Param& operator[](int i) { return items_[std::size_t(i)]; }
    const Param& operator[](int i) const { return items_[std::size_t(i)]; }

    Tensor4& tensor(int i) { return items_[std::size_t(i)].value; }
    const Tensor4& tensor(int i) const { return items_[std::size_t(i)].value; }

    int find(const std::string& name) const {
        for (int i = 0; i < size(); ++i)
            if (items_[std::size_t(i)].name == name) return i;
        return -1;
    }

    std::int64_t scalar_count(bool trainable_only) const {
        std::int64_t total = 0;
        for (const Param& p : items_)
            if (!trainable_only || p.trainable) total += p.value.dims().numel();
        return total;
    }

    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

private:
    std::vector<Param> items_;
};

// Per-parameter gradient accumulators aligned with a ParamStore.
class GradStore {
public:
    explicit GradStore(const ParamStore& store) {
        grads_.reserve(std::size_t(store.size()));
        for (int i = 0; i < store.size(); ++i)
            grads_.emplace_back(store.tensor(i).dims());
    }

    Tensor4& operator[](int i) { return grads_[std::size_t(i)]; }
    const Tensor4& operator[](int i) const { return grads_[std::size_t(i)]; }

    void accumulate(int i, const Tensor4& g) {
        Tensor4& dst = grads_[std::size_t(i)];
        require_same_shape(dst, g, "GradStore::accumulate");
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g[k];
    }

    int size() const { return int(grads_.size()); }

private:
    std::vector<Tensor4> grads_;
};

}  // namespace ldmres
