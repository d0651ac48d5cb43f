#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lgmc {

enum class AttentionKernel { vanilla, efficient };

std::string_view to_string(AttentionKernel kernel);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

// Ordinary least squares on (ln x, ln t). Needs >= 3 points with x, t > 0.
SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points);

struct BenchSample {
    AttentionKernel kernel = AttentionKernel::efficient;
    std::size_t tokens = 0;  // L (query and key/value token count)
    std::size_t channels = 0;
    double median_ns = 0.0;
    std::size_t reps = 0;
    std::size_t warmup = 0;
    bool single_thread = true;
    std::size_t peak_bytes = 0;  // estimated working set of the kernel
    bool skipped = false;        // over the memory budget; not timed
};

struct KernelFit {
    AttentionKernel kernel = AttentionKernel::efficient;
    SlopeFit fit;
    std::size_t points = 0;
    bool noisy = false;  // r² below the reporting threshold
};

struct BenchReport {
    std::vector<BenchSample> samples;
    std::vector<KernelFit> fits;
    // Axis the slopes were fitted against: "L" or "C".
    std::string axis = "L";
};

// Replaces kernel execution with a synthetic duration in nanoseconds; lets
// tests verify the fitting path independently of the clock.
using TimingHook = std::function<double(AttentionKernel, std::size_t tokens, std::size_t channels)>;

inline constexpr double kMinRSquared = 0.95;

struct BenchConfig {
    std::vector<std::size_t> tokens{256, 512, 1024, 2048, 4096, 8192, 16384};
    std::size_t channels = 64;
    std::size_t reps = 9;
    std::size_t warmup = 2;
    std::size_t memory_budget_bytes = std::size_t{2} << 30;
    std::uint64_t seed = 2024;
    bool single_thread = true;
    std::vector<AttentionKernel> kernels{AttentionKernel::vanilla, AttentionKernel::efficient};
    TimingHook timing_hook;

    void validate() const;
};

// Estimated bytes held by one kernel invocation at (L, C) in 32-bit.
std::size_t attention_peak_bytes(AttentionKernel kernel, std::size_t tokens, std::size_t channels);

// Times each kernel at every L (fixed C) and fits log-log slopes in L.
BenchReport run_attention_scaling(const BenchConfig& config);

// Times each kernel at fixed L across config-supplied channel counts and fits
// slopes in C.
BenchReport run_channel_scaling(const BenchConfig& config, std::size_t tokens,
                                const std::vector<std::size_t>& channel_counts);

// Fits slopes from the samples. Throws DomainError if any timed sample lacks
// the single-thread flag.
std::vector<KernelFit> fit_report(const std::vector<BenchSample>& samples, bool along_channels);

const KernelFit* find_fit(const BenchReport& report, AttentionKernel kernel);

// kernel,L,C,median_ns,reps (skipped points carry median_ns "skipped").
std::string bench_csv(const BenchReport& report);
std::string bench_summary_json(const BenchReport& report);

}  // namespace lgmc
