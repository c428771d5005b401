#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ldmres/errors.hpp"

namespace ldmres {

struct Shape4 {
    int n = 0;  // batch
    int c = 0;  // channels
    int h = 0;  // rows
    int w = 0;  // columns

    bool operator==(const Shape4&) const = default;

    std::int64_t numel() const {
        return std::int64_t(n) * c * h * w;
    }

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

// Dense rank-4 array, row-major in (n, c, h, w) order. All values are
// 32-bit floats; every tensor in the engine, including BN vectors stored
// as (1,c,1,1), is one of these.
class Tensor4 {
public:
    Tensor4() = default;

    explicit Tensor4(Shape4 dims, float fill = 0.0f)
        : dims_(dims), data_(static_cast<std::size_t>(dims.numel()), fill) {
        if (dims.n < 0 || dims.c < 0 || dims.h < 0 || dims.w < 0)
            throw ShapeError("negative tensor dimension " + dims.str());
    }

    Tensor4(int n, int c, int h, int w, float fill = 0.0f)
        : Tensor4(Shape4{n, c, h, w}, fill) {}

    const Shape4& dims() const { return dims_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(int n, int c, int y, int x) const {
        return ((std::size_t(n) * dims_.c + c) * dims_.h + y) * dims_.w + x;
    }

    float& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
    float at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

    // Start of the (n, c) spatial plane; planes are contiguous h*w runs.
    float* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }
    const float* plane(int n, int c) const { return data_.data() + index(n, c, 0, 0); }

    void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (float v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const Tensor4&) const = default;

private:
    Shape4 dims_;
    std::vector<float> data_;
};

inline void require_same_shape(const Tensor4& a, const Tensor4& b, const char* what) {
    if (!(a.dims() == b.dims()))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.dims().str() +
                         " vs " + b.dims().str());
}

}  // namespace ldmres
