#include "lgmc/motion.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <tuple>

#include "lgmc/rng.hpp"
#include "lgmc/tensor_io.hpp"

namespace lgmc {

template <class T>
BasicFlowField<T>::BasicFlowField(std::size_t width, std::size_t height, T u, T v)
    : width_(width), height_(height) {
    if (width == 0 || height == 0) throw ShapeError("flow field dimensions must be positive");
    data_.resize(2 * width * height);
    for (std::size_t i = 0; i < width * height; ++i) {
        data_[2 * i] = u;
        data_[2 * i + 1] = v;
    }
}

template <class T>
void BasicFlowField<T>::validate(double cap) const {
    for (std::size_t i = 0; i + 1 < data_.size(); i += 2) {
        const double u = data_[i], v = data_[i + 1];
        if (!std::isfinite(u) || !std::isfinite(v)) throw DomainError("flow field has non-finite entries");
        if (std::hypot(u, v) > cap) {
            throw DomainError("flow vector magnitude " + std::to_string(std::hypot(u, v)) +
                              " exceeds cap " + std::to_string(cap));
        }
    }
}

namespace {

template <class T>
void require_flow_matches(const BasicTensor<T>& feature, const BasicFlowField<T>& flow, const char* what) {
    require_rank(feature, 3, what);
    if (feature.dim(1) != flow.height() || feature.dim(2) != flow.width()) {
        throw ShapeError(std::string(what) + ": feature " + shape_string(feature.dims()) + " vs flow " +
                         std::to_string(flow.height()) + "x" + std::to_string(flow.width()));
    }
}

// Clamped bilinear sample location along one axis.
template <class T>
struct Axis {
    std::size_t lo;
    std::size_t hi;
    T frac;
    bool clamped;
};

template <class T>
Axis<T> locate(std::size_t pos, T offset, std::size_t extent) {
    const T s = static_cast<T>(pos) + offset;
    const T last = static_cast<T>(extent - 1);
    Axis<T> a{};
    a.clamped = s < T(0) || s > last;
    const T c = std::clamp(s, T(0), last);
    a.lo = static_cast<std::size_t>(std::floor(c));
    a.hi = std::min(a.lo + 1, extent - 1);
    a.frac = c - static_cast<T>(a.lo);
    return a;
}

}  // namespace

template <class T>
BasicTensor<T> bilinear_warp(const BasicTensor<T>& feature, const BasicFlowField<T>& flow) {
    require_flow_matches(feature, flow, "bilinear_warp");
    flow.validate();
    const std::size_t C = feature.dim(0), H = feature.dim(1), W = feature.dim(2);
    BasicTensor<T> out(feature.dims());
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            const Axis<T> ax = locate(x, flow.u(x, y), W);
            const Axis<T> ay = locate(y, flow.v(x, y), H);
            for (std::size_t c = 0; c < C; ++c) {
                const T top = (T(1) - ax.frac) * feature(c, ay.lo, ax.lo) + ax.frac * feature(c, ay.lo, ax.hi);
                const T bottom = (T(1) - ax.frac) * feature(c, ay.hi, ax.lo) + ax.frac * feature(c, ay.hi, ax.hi);
                out(c, y, x) = (T(1) - ay.frac) * top + ay.frac * bottom;
            }
        }
    }
    return out;
}

template <class T>
WarpGrad<T> bilinear_warp_backward(const BasicTensor<T>& feature, const BasicFlowField<T>& flow,
                                   const BasicTensor<T>& d_out) {
    require_flow_matches(feature, flow, "bilinear_warp_backward");
    if (d_out.dims() != feature.dims()) {
        throw ShapeError("bilinear_warp_backward: d_out " + shape_string(d_out.dims()) +
                         " does not match feature " + shape_string(feature.dims()));
    }
    const std::size_t C = feature.dim(0), H = feature.dim(1), W = feature.dim(2);
    WarpGrad<T> g{BasicTensor<T>(feature.dims()), BasicFlowField<T>(W, H)};
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            const Axis<T> ax = locate(x, flow.u(x, y), W);
            const Axis<T> ay = locate(y, flow.v(x, y), H);
            T du = 0, dv = 0;
            for (std::size_t c = 0; c < C; ++c) {
                const T d = d_out(c, y, x);
                const T i00 = feature(c, ay.lo, ax.lo), i01 = feature(c, ay.lo, ax.hi);
                const T i10 = feature(c, ay.hi, ax.lo), i11 = feature(c, ay.hi, ax.hi);
                g.d_feature(c, ay.lo, ax.lo) += d * (T(1) - ay.frac) * (T(1) - ax.frac);
                g.d_feature(c, ay.lo, ax.hi) += d * (T(1) - ay.frac) * ax.frac;
                g.d_feature(c, ay.hi, ax.lo) += d * ay.frac * (T(1) - ax.frac);
                g.d_feature(c, ay.hi, ax.hi) += d * ay.frac * ax.frac;
                du += d * ((T(1) - ay.frac) * (i01 - i00) + ay.frac * (i11 - i10));
                dv += d * ((T(1) - ax.frac) * (i10 - i00) + ax.frac * (i11 - i01));
            }
            g.d_flow.u(x, y) = ax.clamped ? T(0) : du;
            g.d_flow.v(x, y) = ay.clamped ? T(0) : dv;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------

Tensor average_pool2(const Tensor& map) {
    require_rank(map, 3, "average_pool2");
    const std::size_t C = map.dim(0), H = map.dim(1), W = map.dim(2);
    const std::size_t Ho = (H + 1) / 2, Wo = (W + 1) / 2;
    Tensor out(Shape{C, Ho, Wo});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t y = 0; y < Ho; ++y) {
            for (std::size_t x = 0; x < Wo; ++x) {
                float sum = 0.0f;
                int n = 0;
                for (std::size_t yy = 2 * y; yy < std::min(2 * y + 2, H); ++yy) {
                    for (std::size_t xx = 2 * x; xx < std::min(2 * x + 2, W); ++xx) {
                        sum += map(c, yy, xx);
                        ++n;
                    }
                }
                out(c, y, x) = sum / static_cast<float>(n);
            }
        }
    }
    return out;
}

namespace {

Tensor pyramid_projection(std::size_t in_channels, std::size_t out_channels, Rng& rng) {
    Tensor w(Shape{out_channels, in_channels});
    const double k = 1.0 / std::sqrt(static_cast<double>(in_channels));
    const std::size_t passthrough = std::min(in_channels, out_channels);
    for (std::size_t o = 0; o < out_channels; ++o) {
        for (std::size_t i = 0; i < in_channels; ++i) {
            w(o, i) = o < passthrough ? (o == i ? 1.0f : 0.0f) : static_cast<float>(rng.uniform(-k, k));
        }
    }
    return w;
}

Tensor project_channels(const Tensor& map, const Tensor& weight) {
    const std::size_t Cin = map.dim(0), Cout = weight.dim(0), plane = map.dim(1) * map.dim(2);
    Tensor out(Shape{Cout, map.dim(1), map.dim(2)});
    for (std::size_t o = 0; o < Cout; ++o) {
        float* dst = out.data() + o * plane;
        for (std::size_t i = 0; i < Cin; ++i) {
            const float w = weight(o, i);
            if (w == 0.0f) continue;
            const float* src = map.data() + i * plane;
            for (std::size_t p = 0; p < plane; ++p) dst[p] += w * src[p];
        }
    }
    return out;
}

}  // namespace

FeaturePyramid build_pyramid(const Tensor& propagated, const PyramidConfig& config) {
    require_rank(propagated, 3, "build_pyramid");
    if (propagated.dim(1) < 4 || propagated.dim(2) < 4) {
        throw ShapeError("build_pyramid: input " + shape_string(propagated.dims()) +
                         " is smaller than 4x4");
    }
    for (auto c : config.channels) {
        if (c == 0) throw ShapeError("build_pyramid: channel counts must be positive");
    }
    Rng rng(config.seed);
    const std::size_t cin = propagated.dim(0);
    FeaturePyramid p;
    Tensor pooled = propagated;
    for (std::size_t s = 0; s < 3; ++s) {
        if (s > 0) pooled = average_pool2(pooled);
        p.levels[s] = project_channels(pooled, pyramid_projection(cin, config.channels[s], rng));
    }
    return p;
}

FlowField downsample_flow(const FlowField& flow, int factor) {
    if (factor != 2 && factor != 4) throw DomainError("downsample_flow: factor must be 2 or 4");
    const auto f = static_cast<std::size_t>(factor);
    const std::size_t W = flow.width(), H = flow.height();
    const std::size_t Wo = (W + f - 1) / f, Ho = (H + f - 1) / f;
    FlowField out(Wo, Ho);
    for (std::size_t y = 0; y < Ho; ++y) {
        for (std::size_t x = 0; x < Wo; ++x) {
            double su = 0.0, sv = 0.0;
            int n = 0;
            for (std::size_t yy = y * f; yy < std::min(y * f + f, H); ++yy) {
                for (std::size_t xx = x * f; xx < std::min(x * f + f, W); ++xx) {
                    su += flow.u(xx, yy);
                    sv += flow.v(xx, yy);
                    ++n;
                }
            }
            out.u(x, y) = static_cast<float>(su / n / factor);
            out.v(x, y) = static_cast<float>(sv / n / factor);
        }
    }
    return out;
}

std::array<Tensor, 3> local_contexts(const FeaturePyramid& pyramid, const FlowField& flow) {
    const Tensor& base = pyramid.levels[0];
    if (base.dim(1) != flow.height() || base.dim(2) != flow.width()) {
        throw ShapeError("local_contexts: flow " + std::to_string(flow.height()) + "x" +
                         std::to_string(flow.width()) + " does not match scale 0 " + shape_string(base.dims()));
    }
    return {bilinear_warp(pyramid.levels[0], flow), bilinear_warp(pyramid.levels[1], downsample_flow(flow, 2)),
            bilinear_warp(pyramid.levels[2], downsample_flow(flow, 4))};
}

FlowField synth_flow(SynthKind kind, const SynthParams& params, std::size_t width, std::size_t height) {
    if (!std::isfinite(params.tx) || !std::isfinite(params.ty) || !std::isfinite(params.theta) ||
        !std::isfinite(params.zoom)) {
        throw DomainError("synth_flow: parameters must be finite");
    }
    FlowField flow(width, height);
    const double cx = (static_cast<double>(width) - 1.0) / 2.0;
    const double cy = (static_cast<double>(height) - 1.0) / 2.0;
    const double cs = std::cos(params.theta), sn = std::sin(params.theta);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const double px = static_cast<double>(x) - cx, py = static_cast<double>(y) - cy;
            double u = 0.0, v = 0.0;
            switch (kind) {
                case SynthKind::translation:
                    u = params.tx;
                    v = params.ty;
                    break;
                case SynthKind::rotation:
                    u = cs * px - sn * py - px;
                    v = sn * px + cs * py - py;
                    break;
                case SynthKind::zoom:
                    u = (params.zoom - 1.0) * px;
                    v = (params.zoom - 1.0) * py;
                    break;
            }
            flow.u(x, y) = static_cast<float>(u);
            flow.v(x, y) = static_cast<float>(v);
        }
    }
    return flow;
}

FlowField block_match(const Tensor& reference, const Tensor& current, std::size_t block, std::size_t range) {
    require_rank(reference, 3, "block_match reference");
    require_rank(current, 3, "block_match current");
    if (reference.dims() != current.dims() || reference.dim(0) != 1) {
        throw ShapeError("block_match: expects two 1xHxW frames, got " + shape_string(reference.dims()) +
                         " and " + shape_string(current.dims()));
    }
    if (block < 4) throw DomainError("block_match: block size must be at least 4");
    if (range < 1) throw DomainError("block_match: search range must be at least 1");
    const std::size_t H = reference.dim(1), W = reference.dim(2);
    const auto r = static_cast<std::ptrdiff_t>(range);
    FlowField flow(W, H);

    for (std::size_t by = 0; by < H; by += block) {
        for (std::size_t bx = 0; bx < W; bx += block) {
            const std::size_t ey = std::min(by + block, H), ex = std::min(bx + block, W);
            // (sad, |u|+|v|, v, u), minimized lexicographically.
            auto best = std::make_tuple(std::numeric_limits<double>::infinity(), std::ptrdiff_t{0},
                                        std::ptrdiff_t{0}, std::ptrdiff_t{0});
            for (std::ptrdiff_t v = -r; v <= r; ++v) {
                if (static_cast<std::ptrdiff_t>(by) + v < 0 || static_cast<std::ptrdiff_t>(ey) + v > static_cast<std::ptrdiff_t>(H))
                    continue;
                for (std::ptrdiff_t u = -r; u <= r; ++u) {
                    if (static_cast<std::ptrdiff_t>(bx) + u < 0 || static_cast<std::ptrdiff_t>(ex) + u > static_cast<std::ptrdiff_t>(W))
                        continue;
                    double sad = 0.0;
                    for (std::size_t y = by; y < ey; ++y) {
                        const std::size_t ry = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + v);
                        for (std::size_t x = bx; x < ex; ++x) {
                            const std::size_t rx = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) + u);
                            sad += std::abs(static_cast<double>(current(0, y, x)) - reference(0, ry, rx));
                        }
                    }
                    const auto candidate = std::make_tuple(sad, std::abs(u) + std::abs(v), v, u);
                    if (candidate < best) best = candidate;
                }
            }
            const auto bu = static_cast<float>(std::get<3>(best)), bv = static_cast<float>(std::get<2>(best));
            for (std::size_t y = by; y < ey; ++y) {
                for (std::size_t x = bx; x < ex; ++x) {
                    flow.u(x, y) = bu;
                    flow.v(x, y) = bv;
                }
            }
        }
    }
    return flow;
}

// ---------------------------------------------------------------------------

namespace {

constexpr float kFlowMagic = 202021.25f;

template <class U>
void put_le(std::vector<std::uint8_t>& out, U value) {
    std::uint8_t buf[sizeof(U)];
    std::memcpy(buf, &value, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
    out.insert(out.end(), buf, buf + sizeof(U));
}

template <class U>
U get_le(const std::uint8_t* p) {
    std::uint8_t buf[sizeof(U)];
    std::memcpy(buf, p, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
    U value;
    std::memcpy(&value, buf, sizeof(U));
    return value;
}

}  // namespace

std::vector<std::uint8_t> encode_flow(const FlowField& flow) {
    std::vector<std::uint8_t> out;
    out.reserve(12 + 4 * flow.values().size());
    put_le<float>(out, kFlowMagic);
    put_le<std::int32_t>(out, static_cast<std::int32_t>(flow.width()));
    put_le<std::int32_t>(out, static_cast<std::int32_t>(flow.height()));
    for (float v : flow.values()) put_le<float>(out, v);
    return out;
}

FlowField decode_flow(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12) throw FormatError("flow file shorter than its header");
    if (get_le<float>(bytes.data()) != kFlowMagic) throw FormatError("bad flow magic (expected 202021.25)");
    const auto w = get_le<std::int32_t>(bytes.data() + 4);
    const auto h = get_le<std::int32_t>(bytes.data() + 8);
    if (w <= 0 || h <= 0) {
        throw FormatError("flow dimensions must be positive, got " + std::to_string(w) + "x" + std::to_string(h));
    }
    const std::size_t n = 2 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (bytes.size() - 12 < 4 * n) {
        throw FormatError("truncated flow payload: header promises " + std::to_string(4 * n) + " bytes, have " +
                          std::to_string(bytes.size() - 12));
    }
    FlowField flow(static_cast<std::size_t>(w), static_cast<std::size_t>(h));
    for (std::size_t i = 0; i < n; ++i) flow.values()[i] = get_le<float>(bytes.data() + 12 + 4 * i);
    return flow;
}

FlowField load_flow(const std::filesystem::path& path) { return decode_flow(read_file(path)); }

void save_flow(const std::filesystem::path& path, const FlowField& flow) { write_file(path, encode_flow(flow)); }

template class BasicFlowField<float>;
template class BasicFlowField<double>;
template BasicTensor<float> bilinear_warp(const BasicTensor<float>&, const BasicFlowField<float>&);
template BasicTensor<double> bilinear_warp(const BasicTensor<double>&, const BasicFlowField<double>&);
template WarpGrad<float> bilinear_warp_backward(const BasicTensor<float>&, const BasicFlowField<float>&,
                                                const BasicTensor<float>&);
template WarpGrad<double> bilinear_warp_backward(const BasicTensor<double>&, const BasicFlowField<double>&,
                                                 const BasicTensor<double>&);

}  // namespace lgmc
