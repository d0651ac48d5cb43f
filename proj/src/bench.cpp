#include "lgmc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>

#include "lgmc/attention.hpp"
#include "lgmc/errors.hpp"
#include "lgmc/metrics.hpp"
#include "lgmc/rng.hpp"

namespace lgmc {

std::string_view to_string(AttentionKernel kernel) {
    return kernel == AttentionKernel::vanilla ? "vanilla" : "efficient";
}

SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw DomainError("fit_loglog_slope: need at least 3 points");
    double sx = 0, sy = 0;
    for (const auto& [x, t] : points) {
        if (!(x > 0.0) || !(t > 0.0)) throw DomainError("fit_loglog_slope: values must be positive");
        sx += std::log(x);
        sy += std::log(t);
    }
    const auto n = static_cast<double>(points.size());
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& [x, t] : points) {
        const double dx = std::log(x) - mx, dy = std::log(t) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw DomainError("fit_loglog_slope: x values must not all be equal");
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    // A perfectly flat series is fitted exactly.
    f.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

void BenchConfig::validate() const {
    if (reps < 5) throw DomainError("bench: repetitions must be at least 5");
    if (channels == 0) throw DomainError("bench: channel count must be positive");
}

std::size_t attention_peak_bytes(AttentionKernel kernel, std::size_t tokens, std::size_t channels) {
    const std::size_t L = tokens, C = channels;
    if (kernel == AttentionKernel::vanilla) {
        // inputs, transposed keys, L×L similarity, output
        return sizeof(float) * (2 * L * C + L * C + L * L + L * C);
    }
    // inputs, two softmaxes, transposed keys, C×C context, output
    return sizeof(float) * (2 * L * C + 3 * L * C + C * C + L * C);
}

namespace {

double time_kernel(AttentionKernel kernel, const AttentionInputs& inp, std::size_t reps, std::size_t warmup) {
    volatile float sink = 0.0f;
    auto run = [&] {
        if (kernel == AttentionKernel::vanilla) {
            sink = sink + vanilla_cross_attention(inp).output[0];
        } else {
            sink = sink + efficient_cross_attention(inp)[0];
        }
    };
    for (std::size_t i = 0; i < warmup; ++i) run();
    std::vector<double> ns;
    ns.reserve(reps);
    for (std::size_t i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        run();
        const auto t1 = std::chrono::steady_clock::now();
        ns.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
    }
    std::sort(ns.begin(), ns.end());
    return reps % 2 ? ns[reps / 2] : 0.5 * (ns[reps / 2 - 1] + ns[reps / 2]);
}

BenchSample measure(const BenchConfig& config, AttentionKernel kernel, std::size_t L, std::size_t C) {
    BenchSample s;
    s.kernel = kernel;
    s.tokens = L;
    s.channels = C;
    s.reps = config.reps;
    s.warmup = config.warmup;
    s.single_thread = config.single_thread;
    s.peak_bytes = attention_peak_bytes(kernel, L, C);
    if (kernel == AttentionKernel::vanilla && s.peak_bytes > config.memory_budget_bytes) {
        s.skipped = true;
        return s;
    }
    if (config.timing_hook) {
        s.median_ns = config.timing_hook(kernel, L, C);
        return s;
    }
    // Identical inputs for every kernel at a given (L, C).
    Rng rng(config.seed ^ (L * 0x100000001b3ull) ^ C);
    AttentionInputs inp(random_tensor<Tensor>(rng, -1.0f, 1.0f, Shape{L, C}),
                        random_tensor<Tensor>(rng, -1.0f, 1.0f, Shape{L, C}));
    s.median_ns = time_kernel(kernel, inp, config.reps, config.warmup);
    return s;
}

}  // namespace

std::vector<KernelFit> fit_report(const std::vector<BenchSample>& samples, bool along_channels) {
    std::vector<KernelFit> fits;
    for (auto kernel : {AttentionKernel::vanilla, AttentionKernel::efficient}) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& s : samples) {
            if (s.kernel != kernel || s.skipped) continue;
            if (!s.single_thread) throw DomainError("bench: refusing to fit slopes from multi-threaded timings");
            pts.emplace_back(static_cast<double>(along_channels ? s.channels : s.tokens), s.median_ns);
        }
        if (pts.size() < 3) continue;
        KernelFit kf;
        kf.kernel = kernel;
        kf.fit = fit_loglog_slope(pts);
        kf.points = pts.size();
        kf.noisy = kf.fit.r_squared < kMinRSquared;
        fits.push_back(kf);
    }
    return fits;
}

BenchReport run_attention_scaling(const BenchConfig& config) {
    config.validate();
    if (config.tokens.size() < 4) throw DomainError("bench: need at least 4 token counts");
    for (std::size_t i = 1; i < config.tokens.size(); ++i) {
        if (config.tokens[i] <= config.tokens[i - 1]) throw DomainError("bench: token counts must increase");
    }
    if (config.tokens.front() == 0 || config.tokens.back() < 16 * config.tokens.front()) {
        throw DomainError("bench: token counts must span at least a 16x range");
    }
    BenchReport report;
    for (auto kernel : config.kernels)
        for (auto L : config.tokens) report.samples.push_back(measure(config, kernel, L, config.channels));
    report.fits = fit_report(report.samples, false);
    report.axis = "L";
    return report;
}

BenchReport run_channel_scaling(const BenchConfig& config, std::size_t tokens,
                                const std::vector<std::size_t>& channel_counts) {
    config.validate();
    if (channel_counts.size() < 3) throw DomainError("bench: need at least 3 channel counts");
    BenchReport report;
    for (auto kernel : config.kernels)
        for (auto C : channel_counts) report.samples.push_back(measure(config, kernel, tokens, C));
    report.fits = fit_report(report.samples, true);
    report.axis = "C";
    return report;
}

const KernelFit* find_fit(const BenchReport& report, AttentionKernel kernel) {
    for (const auto& f : report.fits)
        if (f.kernel == kernel) return &f;
    return nullptr;
}

std::string bench_csv(const BenchReport& report) {
    std::string out = "kernel,L,C,median_ns,reps\n";
    for (const auto& s : report.samples) {
        out += std::string(to_string(s.kernel)) + "," + std::to_string(s.tokens) + "," + std::to_string(s.channels) +
               "," + (s.skipped ? std::string("skipped") : format_number(s.median_ns)) + "," +
               std::to_string(s.reps) + "\n";
    }
    return out;
}

std::string bench_summary_json(const BenchReport& report) {
    nlohmann::ordered_json j;
    j["axis"] = report.axis;
    j["min_r_squared"] = kMinRSquared;
    nlohmann::ordered_json fits = nlohmann::ordered_json::array();
    for (const auto& f : report.fits) {
        fits.push_back({{"kernel", to_string(f.kernel)},
                        {"slope", f.fit.slope},
                        {"intercept", f.fit.intercept},
                        {"r_squared", f.fit.r_squared},
                        {"points", f.points},
                        {"noisy", f.noisy}});
    }
    j["fits"] = fits;
    nlohmann::ordered_json samples = nlohmann::ordered_json::array();
    for (const auto& s : report.samples) {
        samples.push_back({{"kernel", to_string(s.kernel)},
                           {"L", s.tokens},
                           {"C", s.channels},
                           {"median_ns", s.skipped ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(s.median_ns)},
                           {"reps", s.reps},
                           {"warmup", s.warmup},
                           {"single_thread", s.single_thread},
                           {"peak_bytes", s.peak_bytes},
                           {"skipped", s.skipped}});
    }
    j["samples"] = samples;
    return j.dump(2) + "\n";
}

}  // namespace lgmc
