#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace lgmc {

enum class GradKernel { matmul, softmax, warp, efficient_attention };

std::string_view to_string(GradKernel kernel);
std::optional<GradKernel> parse_grad_kernel(std::string_view name);

inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kGradEpsilon = 1e-5;
// Gradient magnitudes below this are compared on an absolute scale; central
// differences of exactly-zero gradients leave ~1e-10 of rounding noise.
inline constexpr double kGradMagnitudeFloor = 1e-4;

struct GradcheckResult {
    GradKernel kernel = GradKernel::matmul;
    std::size_t seeds = 0;
    double max_relative_error = 0.0;
    bool passed = false;
};

// Compares each analytic backward against central finite differences of the
// scalar loss Σ W ⊙ forward(inputs) in 64-bit, with random shapes, inputs and
// W per seed. Warp flows keep every sample coordinate off the integer lattice.
GradcheckResult gradcheck(GradKernel kernel, std::size_t seeds, std::uint64_t base_seed = 1);

}  // namespace lgmc
