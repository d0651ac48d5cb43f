#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lgmc/tensor.hpp"

namespace lgmc {

double mse(const Tensor& a, const Tensor& b);
double mse(const Tensor64& a, const Tensor64& b);

// +infinity when mse == 0.
double psnr_from_mse(double mse_value, double peak);
double psnr(const Tensor& a, const Tensor& b, double peak);

// Five-scale MS-SSIM over 1×H×W or 3×H×W tensors (channels averaged). Needs
// min(H, W) >= 176 so the 11-tap window fits at the coarsest scale.
inline constexpr std::size_t kMsSsimMinExtent = 176;
double ms_ssim(const Tensor& a, const Tensor& b, double peak = 1.0);

// L = R + λ·D
double rd_loss(double rate_bpp, double distortion, double lambda);

enum class DistortionMetric { mse, ms_ssim };

// {256, 512, 1024, 2048}; divided by 50 for MS-SSIM.
std::vector<double> default_lambdas(DistortionMetric metric);

struct RdPoint {
    double rate = 0.0;     // bits per pixel
    double quality = 0.0;  // PSNR (dB) or MS-SSIM
};

// Bjøntegaard delta rate in percent; negative means `test` needs fewer bits at
// equal quality. Natural cubic spline of log10(rate) over quality, averaged by
// trapezoidal integration at 1000 samples across the shared quality range.
double bd_rate(const std::vector<RdPoint>& anchor, const std::vector<RdPoint>& test);

std::vector<RdPoint> parse_rd_csv(std::string_view text);
std::string format_rd_csv(const std::vector<RdPoint>& curve);

// One row per coded sequence, labelled with its test class (e.g. "HEVC_B").
struct SequenceCurves {
    std::string sequence;
    std::string test_class;
    std::vector<RdPoint> anchor;
    std::vector<RdPoint> test;
};

struct ClassBdRate {
    // Mean of the per-sequence BD-rates in the class.
    double mean_of_sequences = 0.0;
    // BD-rate of the class-mean curves (points averaged index-wise).
    double of_mean_curves = 0.0;
    std::size_t sequences = 0;
};

struct BdRateSummary {
    std::vector<std::pair<std::string, double>> per_sequence;
    std::map<std::string, ClassBdRate> per_class;
};

BdRateSummary summarize_bd_rates(const std::vector<SequenceCurves>& curves);

// ---------------------------------------------------------------------------
// Per-frame bit allocation
// ---------------------------------------------------------------------------

struct FrameStats {
    std::size_t frame_index = 0;
    double total_bpp = 0.0;
    double motion_bpp = 0.0;
    double mse = 0.0;
    double psnr = 0.0;

    bool operator==(const FrameStats&) const = default;
};

// Header frame_index,total_bpp,motion_bpp,mse,psnr; 6 significant digits.
std::string format_frame_stats_csv(const std::vector<FrameStats>& stats);
std::vector<FrameStats> parse_frame_stats_csv(std::string_view text);

struct BitAllocationReport {
    std::vector<FrameStats> frames;
    double mean_bpp = 0.0;
    double mean_motion_bpp = 0.0;
    double mean_psnr = 0.0;
};

BitAllocationReport bit_allocation_report(const std::vector<FrameStats>& stats);

// Per-frame series plus a trailing "mean" row.
std::string report_csv(const BitAllocationReport& report);
// Whitespace-separated columns for gnuplot, '#' header.
std::string report_gnuplot(const BitAllocationReport& report);
// Side-by-side series with delta columns (a - b) over the common frame indices.
std::string compare_reports_csv(const BitAllocationReport& a, const BitAllocationReport& b);

// Locale-independent %.6g.
std::string format_number(double value);

}  // namespace lgmc
