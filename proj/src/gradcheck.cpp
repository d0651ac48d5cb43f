#include "lgmc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lgmc/attention.hpp"
#include "lgmc/motion.hpp"
#include "lgmc/rng.hpp"
#include "lgmc/tensor.hpp"

namespace lgmc {

std::string_view to_string(GradKernel kernel) {
    switch (kernel) {
        case GradKernel::matmul: return "matmul";
        case GradKernel::softmax: return "softmax";
        case GradKernel::warp: return "warp";
        case GradKernel::efficient_attention: return "efficient_attention";
    }
    return "?";
}

std::optional<GradKernel> parse_grad_kernel(std::string_view name) {
    for (auto k : {GradKernel::matmul, GradKernel::softmax, GradKernel::warp, GradKernel::efficient_attention}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

namespace {

double weighted_sum(const Tensor64& weights, const Tensor64& out) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += weights[i] * out[i];
    return s;
}

double compare(const Tensor64& analytic, const Tensor64& numeric) {
    return max_relative_error(analytic.values(), numeric.values(), kGradMagnitudeFloor);
}

std::size_t extent(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1));
}

double check_matmul(Rng& rng) {
    const std::size_t m = extent(rng, 1, 5), k = extent(rng, 1, 5), n = extent(rng, 1, 5);
    const auto a = random_tensor<Tensor64>(rng, -1, 1, {m, k});
    const auto b = random_tensor<Tensor64>(rng, -1, 1, {k, n});
    const auto w = random_tensor<Tensor64>(rng, -1, 1, {m, n});
    const auto g = matmul_backward(a, b, w);
    const auto fa = finite_difference_gradient([&](const Tensor64& x) { return weighted_sum(w, matmul(x, b)); }, a,
                                               kGradEpsilon);
    const auto fb = finite_difference_gradient([&](const Tensor64& x) { return weighted_sum(w, matmul(a, x)); }, b,
                                               kGradEpsilon);
    return std::max(compare(g.d_a, fa), compare(g.d_b, fb));
}

double check_softmax(Rng& rng) {
    const std::size_t m = extent(rng, 1, 5), n = extent(rng, 1, 6);
    const auto x = random_tensor<Tensor64>(rng, -3, 3, {m, n});
    const auto w = random_tensor<Tensor64>(rng, -1, 1, {m, n});
    const auto rows = softmax_rows_backward(softmax_rows(x), w);
    const auto cols = softmax_cols_backward(softmax_cols(x), w);
    const auto f_rows = finite_difference_gradient(
        [&](const Tensor64& t) { return weighted_sum(w, softmax_rows(t)); }, x, kGradEpsilon);
    const auto f_cols = finite_difference_gradient(
        [&](const Tensor64& t) { return weighted_sum(w, softmax_cols(t)); }, x, kGradEpsilon);
    return std::max(compare(rows, f_rows), compare(cols, f_cols));
}

double check_warp(Rng& rng) {
    const std::size_t C = extent(rng, 1, 3), H = 5, W = 5;
    const auto feature = random_tensor<Tensor64>(rng, -1, 1, {C, H, W});
    const auto w = random_tensor<Tensor64>(rng, -1, 1, {C, H, W});
    FlowField64 flow(W, H);
    for (auto& v : flow.values()) {
        const double whole = std::floor(rng.uniform(-2.0, 2.0));
        v = whole + rng.uniform(0.15, 0.85);
    }
    const auto g = bilinear_warp_backward(feature, flow, w);

    const auto f_feature = finite_difference_gradient(
        [&](const Tensor64& t) { return weighted_sum(w, bilinear_warp(t, flow)); }, feature, kGradEpsilon);

    Tensor64 flow_values(Shape{flow.values().size()}, std::span<const double>(flow.values()));
    const auto f_flow = finite_difference_gradient(
        [&](const Tensor64& t) {
            FlowField64 probe(W, H);
            std::copy(t.values().begin(), t.values().end(), probe.values().begin());
            return weighted_sum(w, bilinear_warp(feature, probe));
        },
        flow_values, kGradEpsilon);
    Tensor64 d_flow(Shape{flow.values().size()}, std::span<const double>(g.d_flow.values()));
    return std::max(compare(g.d_feature, f_feature), compare(d_flow, f_flow));
}

double check_efficient_attention(Rng& rng) {
    const std::size_t lq = extent(rng, 1, 8), lk = extent(rng, 1, 8), c = extent(rng, 1, 5);
    const auto q = random_tensor<Tensor64>(rng, -2, 2, {lq, c});
    const auto kv = random_tensor<Tensor64>(rng, -2, 2, {lk, c});
    const auto w = random_tensor<Tensor64>(rng, -1, 1, {lq, c});
    const auto g = efficient_attention_backward(AttentionInputs64(q, kv), w);
    const auto fq = finite_difference_gradient(
        [&](const Tensor64& t) { return weighted_sum(w, efficient_cross_attention(AttentionInputs64(t, kv))); }, q,
        kGradEpsilon);
    const auto fkv = finite_difference_gradient(
        [&](const Tensor64& t) { return weighted_sum(w, efficient_cross_attention(AttentionInputs64(q, t))); }, kv,
        kGradEpsilon);
    return std::max(compare(g.d_query, fq), compare(g.d_keyvalue, fkv));
}

}  // namespace

GradcheckResult gradcheck(GradKernel kernel, std::size_t seeds, std::uint64_t base_seed) {
    GradcheckResult r;
    r.kernel = kernel;
    r.seeds = seeds;
    for (std::size_t s = 0; s < seeds; ++s) {
        Rng rng(base_seed * 1000003ull + s);
        double err = 0.0;
        switch (kernel) {
            case GradKernel::matmul: err = check_matmul(rng); break;
            case GradKernel::softmax: err = check_softmax(rng); break;
            case GradKernel::warp: err = check_warp(rng); break;
            case GradKernel::efficient_attention: err = check_efficient_attention(rng); break;
        }
        r.max_relative_error = std::max(r.max_relative_error, err);
    }
    r.passed = r.max_relative_error <= kGradTolerance;
    return r;
}

}  // namespace lgmc
