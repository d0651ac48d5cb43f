#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lgmc/tensor.hpp"

namespace lgmc {

inline constexpr double kDefaultFlowCap = 512.0;

// Per-pixel displacement (u, v) in pixels, row-major, u before v. A sample for
// output pixel (x, y) is taken from (x + u, y + v) in the source.
template <class T>
class BasicFlowField {
public:
    BasicFlowField(std::size_t width, std::size_t height, T u = T(0), T v = T(0));

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }

    T& u(std::size_t x, std::size_t y) noexcept { return data_[2 * (y * width_ + x)]; }
    T& v(std::size_t x, std::size_t y) noexcept { return data_[2 * (y * width_ + x) + 1]; }
    T u(std::size_t x, std::size_t y) const noexcept { return data_[2 * (y * width_ + x)]; }
    T v(std::size_t x, std::size_t y) const noexcept { return data_[2 * (y * width_ + x) + 1]; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    // Throws DomainError on non-finite entries or vectors longer than cap.
    void validate(double cap = kDefaultFlowCap) const;

    template <class U>
    BasicFlowField<U> cast() const {
        BasicFlowField<U> out(width_, height_);
        for (std::size_t i = 0; i < data_.size(); ++i) out.values()[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool operator==(const BasicFlowField&) const = default;

private:
    std::size_t width_;
    std::size_t height_;
    std::vector<T> data_;
};

using FlowField = BasicFlowField<float>;
using FlowField64 = BasicFlowField<double>;

// Backward warp with bilinear interpolation. Sample coordinates are clamped to
// [0, W-1] × [0, H-1].
template <class T>
BasicTensor<T> bilinear_warp(const BasicTensor<T>& feature, const BasicFlowField<T>& flow);

template <class T>
struct WarpGrad {
    BasicTensor<T> d_feature;
    BasicFlowField<T> d_flow;
};

// At integer sample coordinates the flow gradient is taken from the cell to the
// right / below. Clamped coordinates contribute no flow gradient.
template <class T>
WarpGrad<T> bilinear_warp_backward(const BasicTensor<T>& feature, const BasicFlowField<T>& flow,
                                   const BasicTensor<T>& d_out);

struct PyramidConfig {
    std::array<std::size_t, 3> channels{32, 48, 64};
    std::uint64_t seed = 7;
};

// scale0: C0×H×W, scale1: C1×⌈H/2⌉×⌈W/2⌉, scale2: C2×⌈H/4⌉×⌈W/4⌉.
struct FeaturePyramid {
    std::array<Tensor, 3> levels;
};

// 2×2 stride-2 average pooling; odd edges average the pixels that exist.
Tensor average_pool2(const Tensor& map);

// Pools the input successively and applies a seeded 1×1 projection per scale.
// The first min(C_in, C_s) output channels of every projection pass the input
// channels through unchanged.
FeaturePyramid build_pyramid(const Tensor& propagated, const PyramidConfig& config);

// factor ∈ {2, 4}: factor×factor average pooling, then magnitudes / factor.
FlowField downsample_flow(const FlowField& flow, int factor);

// l_s = warp(level_s, downsample_flow(flow, 2^s)).
std::array<Tensor, 3> local_contexts(const FeaturePyramid& pyramid, const FlowField& flow);

enum class SynthKind { translation, rotation, zoom };

struct SynthParams {
    double tx = 0.0;
    double ty = 0.0;
    double theta = 0.0;  // radians, rotation about the image center
    double zoom = 1.0;   // radial scale about the image center
};

FlowField synth_flow(SynthKind kind, const SynthParams& params, std::size_t width, std::size_t height);

// Full-search SAD over [-range, range]². Ties go to the smallest |u|+|v|, then
// the smallest v, then the smallest u. Candidates reaching outside the
// reference are skipped. The per-block vector fills the whole block.
FlowField block_match(const Tensor& reference, const Tensor& current, std::size_t block, std::size_t range);

// Middlebury .flo: f32 202021.25, i32 width, i32 height, interleaved (u, v) f32.
std::vector<std::uint8_t> encode_flow(const FlowField& flow);
FlowField decode_flow(std::span<const std::uint8_t> bytes);
FlowField load_flow(const std::filesystem::path& path);
void save_flow(const std::filesystem::path& path, const FlowField& flow);

}  // namespace lgmc
