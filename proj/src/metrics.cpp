#include "lgmc/metrics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace lgmc {

namespace {

template <class T>
double mse_impl(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.dims() != b.dims()) {
        throw ShapeError("mse: shape mismatch " + shape_string(a.dims()) + " vs " + shape_string(b.dims()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(a.size());
}

}  // namespace

double mse(const Tensor& a, const Tensor& b) { return mse_impl(a, b); }
double mse(const Tensor64& a, const Tensor64& b) { return mse_impl(a, b); }

double psnr_from_mse(double mse_value, double peak) {
    if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse_value);
}

double psnr(const Tensor& a, const Tensor& b, double peak) { return psnr_from_mse(mse(a, b), peak); }

// ---------------------------------------------------------------------------
// MS-SSIM
// ---------------------------------------------------------------------------

namespace {

constexpr std::array<double, 5> kMsSsimWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

using Plane = std::vector<double>;

std::array<double, kWindow> gaussian_window() {
    std::array<double, kWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kWindow / 2;
        w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

// Separable "valid" filtering: output is (h-10)×(w-10).
Plane filter_valid(const Plane& in, std::size_t h, std::size_t w, const std::array<double, kWindow>& g) {
    const std::size_t wo = w - kWindow + 1, ho = h - kWindow + 1;
    Plane tmp(h * wo);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < wo; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k) acc += g[k] * in[y * w + x + k];
            tmp[y * wo + x] = acc;
        }
    Plane out(ho * wo);
    for (std::size_t y = 0; y < ho; ++y)
        for (std::size_t x = 0; x < wo; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k) acc += g[k] * tmp[(y + k) * wo + x];
            out[y * wo + x] = acc;
        }
    return out;
}

struct SsimTerms {
    double luminance;
    double contrast_structure;
};

SsimTerms ssim_terms(const Plane& a, const Plane& b, std::size_t h, std::size_t w, double c1, double c2,
                     const std::array<double, kWindow>& g) {
    Plane aa(a.size()), bb(a.size()), ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const Plane mu_a = filter_valid(a, h, w, g), mu_b = filter_valid(b, h, w, g);
    const Plane e_aa = filter_valid(aa, h, w, g), e_bb = filter_valid(bb, h, w, g), e_ab = filter_valid(ab, h, w, g);
    double l_sum = 0.0, cs_sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double mab = mu_a[i] * mu_b[i];
        const double maa = mu_a[i] * mu_a[i], mbb = mu_b[i] * mu_b[i];
        const double var_a = e_aa[i] - maa, var_b = e_bb[i] - mbb, cov = e_ab[i] - mab;
        l_sum += (2.0 * mab + c1) / (maa + mbb + c1);
        cs_sum += (2.0 * cov + c2) / (var_a + var_b + c2);
    }
    const auto n = static_cast<double>(mu_a.size());
    return {l_sum / n, cs_sum / n};
}

Plane downsample2(const Plane& in, std::size_t h, std::size_t w) {
    const std::size_t ho = h / 2, wo = w / 2;
    Plane out(ho * wo);
    for (std::size_t y = 0; y < ho; ++y)
        for (std::size_t x = 0; x < wo; ++x)
            out[y * wo + x] = 0.25 * (in[2 * y * w + 2 * x] + in[2 * y * w + 2 * x + 1] +
                                      in[(2 * y + 1) * w + 2 * x] + in[(2 * y + 1) * w + 2 * x + 1]);
    return out;
}

}  // namespace

double ms_ssim(const Tensor& a, const Tensor& b, double peak) {
    if (a.dims() != b.dims()) {
        throw ShapeError("ms_ssim: shape mismatch " + shape_string(a.dims()) + " vs " + shape_string(b.dims()));
    }
    require_rank(a, 3, "ms_ssim");
    const std::size_t C = a.dim(0), H = a.dim(1), W = a.dim(2);
    if (std::min(H, W) < kMsSsimMinExtent) {
        throw ShapeError("ms_ssim: five scales need min(H, W) >= " + std::to_string(kMsSsimMinExtent) + ", got " +
                         shape_string(a.dims()));
    }
    const auto g = gaussian_window();
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        Plane pa(a.data() + c * H * W, a.data() + (c + 1) * H * W);
        Plane pb(b.data() + c * H * W, b.data() + (c + 1) * H * W);
        std::size_t h = H, w = W;
        double value = 1.0;
        for (std::size_t s = 0; s < kMsSsimWeights.size(); ++s) {
            const SsimTerms t = ssim_terms(pa, pb, h, w, c1, c2, g);
            const double cs = std::max(t.contrast_structure, 0.0);
            if (s + 1 < kMsSsimWeights.size()) {
                value *= std::pow(cs, kMsSsimWeights[s]);
                pa = downsample2(pa, h, w);
                pb = downsample2(pb, h, w);
                h /= 2;
                w /= 2;
            } else {
                value *= std::pow(std::max(t.luminance, 0.0) * cs, kMsSsimWeights[s]);
            }
        }
        total += value;
    }
    return total / static_cast<double>(C);
}

// ---------------------------------------------------------------------------

double rd_loss(double rate_bpp, double distortion, double lambda) { return rate_bpp + lambda * distortion; }

std::vector<double> default_lambdas(DistortionMetric metric) {
    std::vector<double> lambdas{256.0, 512.0, 1024.0, 2048.0};
    if (metric == DistortionMetric::ms_ssim) {
        for (auto& l : lambdas) l /= 50.0;
    }
    return lambdas;
}

// ---------------------------------------------------------------------------
// BD-rate
// ---------------------------------------------------------------------------

namespace {

class NaturalCubicSpline {
public:
    NaturalCubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        m_.assign(n, 0.0);
        if (n < 3) return;
        // Tridiagonal system for interior second derivatives (Thomas algorithm).
        std::vector<double> diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
            diag[i] = 2.0 * (h0 + h1);
            upper[i] = h1;
            rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
        }
        for (std::size_t i = 2; i + 1 < n; ++i) {
            const double lower = x_[i] - x_[i - 1];
            const double f = lower / diag[i - 1];
            diag[i] -= f * upper[i - 1];
            rhs[i] -= f * rhs[i - 1];
        }
        for (std::size_t i = n - 2; i >= 1; --i) {
            m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
            if (i == 1) break;
        }
    }

    double operator()(double t) const {
        auto it = std::upper_bound(x_.begin(), x_.end(), t);
        std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
        i = std::min(i, x_.size() - 2);
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - t) / h, b = (t - x_[i]) / h;
        return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
    }

private:
    std::vector<double> x_, y_, m_;
};

NaturalCubicSpline log_rate_spline(const std::vector<RdPoint>& curve, const char* which) {
    if (curve.size() < 4) {
        throw DomainError(std::string("bd_rate: ") + which + " curve needs at least 4 points, has " +
                          std::to_string(curve.size()));
    }
    std::vector<RdPoint> sorted = curve;
    std::sort(sorted.begin(), sorted.end(), [](const RdPoint& p, const RdPoint& q) { return p.quality < q.quality; });
    std::vector<double> x, y;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (!(sorted[i].rate > 0.0) || !std::isfinite(sorted[i].rate) || !std::isfinite(sorted[i].quality)) {
            throw DomainError(std::string("bd_rate: ") + which + " curve has a non-positive or non-finite point");
        }
        if (i > 0 && sorted[i].quality == sorted[i - 1].quality) {
            throw DomainError(std::string("bd_rate: ") + which + " curve repeats a quality value");
        }
        x.push_back(sorted[i].quality);
        y.push_back(std::log10(sorted[i].rate));
    }
    return NaturalCubicSpline(std::move(x), std::move(y));
}

double quality_min(const std::vector<RdPoint>& c) {
    return std::min_element(c.begin(), c.end(), [](auto& p, auto& q) { return p.quality < q.quality; })->quality;
}
double quality_max(const std::vector<RdPoint>& c) {
    return std::max_element(c.begin(), c.end(), [](auto& p, auto& q) { return p.quality < q.quality; })->quality;
}

}  // namespace

double bd_rate(const std::vector<RdPoint>& anchor, const std::vector<RdPoint>& test) {
    const NaturalCubicSpline sa = log_rate_spline(anchor, "anchor");
    const NaturalCubicSpline st = log_rate_spline(test, "test");
    const double lo = std::max(quality_min(anchor), quality_min(test));
    const double hi = std::min(quality_max(anchor), quality_max(test));
    if (!(hi > lo)) throw DomainError("bd_rate: curves do not overlap in quality");

    constexpr int kSamples = 1000;
    const double step = (hi - lo) / (kSamples - 1);
    double integral = 0.0;
    double prev = st(lo) - sa(lo);
    for (int k = 1; k < kSamples; ++k) {
        const double q = k + 1 == kSamples ? hi : lo + k * step;
        const double cur = st(q) - sa(q);
        integral += 0.5 * (prev + cur) * step;
        prev = cur;
    }
    const double delta = integral / (hi - lo);
    return (std::pow(10.0, delta) - 1.0) * 100.0;
}

// ---------------------------------------------------------------------------
// CSV helpers
// ---------------------------------------------------------------------------

std::string format_number(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (std::isnan(value)) return "nan";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 6);
    return std::string(buf, end);
}

namespace {

std::vector<std::vector<std::string_view>> split_csv(std::string_view text) {
    std::vector<std::vector<std::string_view>> rows;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        std::vector<std::string_view> cells;
        while (true) {
            const auto comma = line.find(',');
            cells.push_back(line.substr(0, comma));
            if (comma == std::string_view::npos) break;
            line = line.substr(comma + 1);
        }
        rows.push_back(std::move(cells));
    }
    return rows;
}

double parse_double(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw FormatError("invalid number '" + std::string(s) + "' in CSV");
    }
    return v;
}

void expect_header(const std::vector<std::vector<std::string_view>>& rows, std::vector<std::string_view> header) {
    if (rows.empty() || rows.front() != header) {
        std::string want;
        for (auto h : header) want += (want.empty() ? "" : ",") + std::string(h);
        throw FormatError("CSV header must be '" + want + "'");
    }
}

}  // namespace

std::vector<RdPoint> parse_rd_csv(std::string_view text) {
    const auto rows = split_csv(text);
    expect_header(rows, {"rate_bpp", "quality"});
    std::vector<RdPoint> curve;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 2) throw FormatError("RD CSV row " + std::to_string(i) + " needs 2 columns");
        curve.push_back({parse_double(rows[i][0]), parse_double(rows[i][1])});
    }
    return curve;
}

std::string format_rd_csv(const std::vector<RdPoint>& curve) {
    std::string out = "rate_bpp,quality\n";
    for (const auto& p : curve) out += format_number(p.rate) + "," + format_number(p.quality) + "\n";
    return out;
}

BdRateSummary summarize_bd_rates(const std::vector<SequenceCurves>& curves) {
    BdRateSummary summary;
    std::map<std::string, std::vector<const SequenceCurves*>> by_class;
    for (const auto& c : curves) {
        summary.per_sequence.emplace_back(c.sequence, bd_rate(c.anchor, c.test));
        by_class[c.test_class].push_back(&c);
    }
    std::size_t idx = 0;
    std::map<std::string, double> sums;
    for (const auto& c : curves) sums[c.test_class] += summary.per_sequence[idx++].second;

    for (const auto& [cls, members] : by_class) {
        auto mean_curve = [&](auto member) {
            const std::size_t n = (members.front()->*member).size();
            std::vector<RdPoint> mean(n);
            for (const auto* m : members) {
                if ((m->*member).size() != n) {
                    throw DomainError("summarize_bd_rates: class " + cls + " mixes curves of different lengths");
                }
                for (std::size_t i = 0; i < n; ++i) {
                    mean[i].rate += (m->*member)[i].rate / static_cast<double>(members.size());
                    mean[i].quality += (m->*member)[i].quality / static_cast<double>(members.size());
                }
            }
            return mean;
        };
        ClassBdRate entry;
        entry.sequences = members.size();
        entry.mean_of_sequences = sums[cls] / static_cast<double>(members.size());
        entry.of_mean_curves = bd_rate(mean_curve(&SequenceCurves::anchor), mean_curve(&SequenceCurves::test));
        summary.per_class[cls] = entry;
    }
    return summary;
}

// ---------------------------------------------------------------------------
// Bit allocation
// ---------------------------------------------------------------------------

std::string format_frame_stats_csv(const std::vector<FrameStats>& stats) {
    std::string out = "frame_index,total_bpp,motion_bpp,mse,psnr\n";
    for (const auto& s : stats) {
        out += std::to_string(s.frame_index) + "," + format_number(s.total_bpp) + "," + format_number(s.motion_bpp) +
               "," + format_number(s.mse) + "," + format_number(s.psnr) + "\n";
    }
    return out;
}

std::vector<FrameStats> parse_frame_stats_csv(std::string_view text) {
    const auto rows = split_csv(text);
    expect_header(rows, {"frame_index", "total_bpp", "motion_bpp", "mse", "psnr"});
    std::vector<FrameStats> stats;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 5) throw FormatError("stats CSV row " + std::to_string(i) + " needs 5 columns");
        const double idx = parse_double(r[0]);
        if (idx < 0 || idx != std::floor(idx)) throw FormatError("stats CSV frame_index must be a whole number");
        stats.push_back({static_cast<std::size_t>(idx), parse_double(r[1]), parse_double(r[2]), parse_double(r[3]),
                         parse_double(r[4])});
    }
    return stats;
}

BitAllocationReport bit_allocation_report(const std::vector<FrameStats>& stats) {
    if (stats.empty()) throw DomainError("bit_allocation_report: no frames");
    BitAllocationReport r;
    r.frames = stats;
    for (const auto& s : stats) {
        r.mean_bpp += s.total_bpp;
        r.mean_motion_bpp += s.motion_bpp;
        r.mean_psnr += s.psnr;
    }
    const auto n = static_cast<double>(stats.size());
    r.mean_bpp /= n;
    r.mean_motion_bpp /= n;
    r.mean_psnr /= n;
    return r;
}

std::string report_csv(const BitAllocationReport& report) {
    std::string out = format_frame_stats_csv(report.frames);
    const double mean_mse = [&] {
        double s = 0.0;
        for (const auto& f : report.frames) s += f.mse;
        return s / static_cast<double>(report.frames.size());
    }();
    out += "mean," + format_number(report.mean_bpp) + "," + format_number(report.mean_motion_bpp) + "," +
           format_number(mean_mse) + "," + format_number(report.mean_psnr) + "\n";
    return out;
}

std::string report_gnuplot(const BitAllocationReport& report) {
    std::string out = "# frame_index total_bpp motion_bpp psnr\n";
    for (const auto& f : report.frames) {
        out += std::to_string(f.frame_index) + " " + format_number(f.total_bpp) + " " + format_number(f.motion_bpp) +
               " " + format_number(f.psnr) + "\n";
    }
    return out;
}

std::string compare_reports_csv(const BitAllocationReport& a, const BitAllocationReport& b) {
    std::map<std::size_t, const FrameStats*> rhs;
    for (const auto& f : b.frames) rhs[f.frame_index] = &f;
    std::string out =
        "frame_index,total_bpp_a,total_bpp_b,delta_total_bpp,motion_bpp_a,motion_bpp_b,delta_motion_bpp,psnr_a,psnr_b,"
        "delta_psnr\n";
    for (const auto& fa : a.frames) {
        auto it = rhs.find(fa.frame_index);
        if (it == rhs.end()) continue;
        const FrameStats& fb = *it->second;
        out += std::to_string(fa.frame_index) + "," + format_number(fa.total_bpp) + "," + format_number(fb.total_bpp) +
               "," + format_number(fa.total_bpp - fb.total_bpp) + "," + format_number(fa.motion_bpp) + "," +
               format_number(fb.motion_bpp) + "," + format_number(fa.motion_bpp - fb.motion_bpp) + "," +
               format_number(fa.psnr) + "," + format_number(fb.psnr) + "," + format_number(fa.psnr - fb.psnr) + "\n";
    }
    out += "mean," + format_number(a.mean_bpp) + "," + format_number(b.mean_bpp) + "," +
           format_number(a.mean_bpp - b.mean_bpp) + "," + format_number(a.mean_motion_bpp) + "," +
           format_number(b.mean_motion_bpp) + "," + format_number(a.mean_motion_bpp - b.mean_motion_bpp) + "," +
           format_number(a.mean_psnr) + "," + format_number(b.mean_psnr) + "," +
           format_number(a.mean_psnr - b.mean_psnr) + "\n";
    return out;
}

}  // namespace lgmc
