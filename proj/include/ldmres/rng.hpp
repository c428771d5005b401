#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace ldmres {

// Counter-based 64-bit generator (splitmix64). The state advances by the
// golden-ratio increment and each output is a finalized mix of the counter,
// so the stream is reproducible bit-for-bit across platforms; constants are
// from Steele et al.'s SplittableRandom finalizer.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return double(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Unbiased integer in [0, bound) via rejection.
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound < 2) return 0;
        std::uint64_t limit = ~std::uint64_t(0) - ~std::uint64_t(0) % bound;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % bound;
    }

    bool coin() { return (next_u64() & 1u) != 0; }

    // Standard normal via Box-Muller; avoids log(0) by flooring u1.
    double normal() {
        double u1 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <class T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace ldmres
