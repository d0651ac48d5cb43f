#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "lgmc/tensor.hpp"

namespace lgmc {

// Seeded generator with platform-independent output. std::mt19937_64 is fully
// specified by the standard; the distributions are not, so the mapping to reals
// is done here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

template <class TensorT>
TensorT random_tensor(Rng& rng, typename TensorT::value_type lo, typename TensorT::value_type hi,
                      const Shape& dims) {
    TensorT t(dims);
    for (auto& v : t.values()) v = static_cast<typename TensorT::value_type>(rng.uniform(lo, hi));
    return t;
}

}  // namespace lgmc
