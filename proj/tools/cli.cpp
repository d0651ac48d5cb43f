#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lgmc/attention.hpp"
#include "lgmc/bench.hpp"
#include "lgmc/codec.hpp"
#include "lgmc/gradcheck.hpp"
#include "lgmc/image_io.hpp"
#include "lgmc/metrics.hpp"
#include "lgmc/motion.hpp"
#include "lgmc/tensor_io.hpp"

namespace lgmc::cli {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
    const auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

void write_text(const fs::path& path, const std::string& text) {
    write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

bool is_pnm(const fs::path& path) {
    const auto ext = path.extension().string();
    return ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

Tensor load_map(const fs::path& path) { return is_pnm(path) ? load_pnm(path) : load_tensor(path); }

Tensor to_gray(const Tensor& image) {
    require_rank(image, 3, "grayscale input");
    if (image.dim(0) == 1) return image;
    Tensor gray(Shape{1, image.dim(1), image.dim(2)});
    const std::size_t plane = image.dim(1) * image.dim(2);
    for (std::size_t p = 0; p < plane; ++p) {
        double s = 0.0;
        for (std::size_t c = 0; c < image.dim(0); ++c) s += image[c * plane + p];
        gray[p] = static_cast<float>(s / static_cast<double>(image.dim(0)));
    }
    return gray;
}

FlowField pad_flow(const FlowField& flow, std::size_t height, std::size_t width) {
    FlowField out(width, height);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            const std::size_t sx = std::min(x, flow.width() - 1), sy = std::min(y, flow.height() - 1);
            out.u(x, y) = flow.u(sx, sy);
            out.v(x, y) = flow.v(sx, sy);
        }
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size() || v == 0) throw FormatError("invalid list entry '" + item + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw FormatError("empty list '" + text + "'");
    return out;
}

std::size_t parse_bytes(const std::string& text) {
    if (text.empty()) throw FormatError("empty memory budget");
    std::size_t mult = 1;
    std::string digits = text;
    switch (text.back()) {
        case 'K': case 'k': mult = std::size_t{1} << 10; digits.pop_back(); break;
        case 'M': case 'm': mult = std::size_t{1} << 20; digits.pop_back(); break;
        case 'G': case 'g': mult = std::size_t{1} << 30; digits.pop_back(); break;
        default: break;
    }
    return parse_size_list(digits).at(0) * mult;
}

// ---------------------------------------------------------------------------

struct AttendArgs {
    std::string query, keyvalue, out, sim, variant = "efficient";
    bool materialize = false;
    std::size_t cap = kDefaultSimilarityCap;
};

void cmd_attend(const AttendArgs& a) {
    AttentionInputs inp(load_tensor(a.query), load_tensor(a.keyvalue));
    if (a.variant == "vanilla") {
        if (inp.query_tokens() * inp.key_tokens() > a.cap) {
            throw ResourceError("vanilla similarity exceeds the cap of " + std::to_string(a.cap) + " entries");
        }
        auto result = vanilla_cross_attention(inp);
        save_tensor(a.out, result.output);
        if (!a.sim.empty()) save_tensor(a.sim, result.similarity);
    } else {
        Tensor similarity;
        if (a.materialize) similarity = materialize_efficient_similarity(inp, a.cap);
        save_tensor(a.out, efficient_cross_attention(inp));
        if (a.materialize && !a.sim.empty()) save_tensor(a.sim, similarity);
    }
}

struct WarpArgs {
    std::string feature, flow, out;
};

void cmd_warp(const WarpArgs& a) { save_tensor(a.out, bilinear_warp(load_map(a.feature), load_flow(a.flow))); }

struct CodeArgs {
    std::string frame, reference, flow, recon, stats, mode = "both";
    double lambda = 1024.0;
    std::uint64_t seed = 1;
    std::size_t frame_index = 0;
    std::size_t pad = 64;
    bool append = false;
};

void cmd_code(const CodeArgs& a) {
    CodecConfig config;
    config.lambda = a.lambda;
    config.seed = a.seed;
    const auto mode = parse_ablation_mode(a.mode);
    if (!mode) throw FormatError("unknown mode '" + a.mode + "'");
    config.mode = *mode;

    const Tensor frame = load_pnm(a.frame);
    if (frame.dim(0) != 3) throw ShapeError("code: frame must be a color (P6) image");
    const Tensor reference = load_map(a.reference);
    const FlowField flow = load_flow(a.flow);
    require_rank(reference, 3, "code reference");
    const std::size_t H = frame.dim(1), W = frame.dim(2);
    if (reference.dim(1) != H || reference.dim(2) != W || flow.height() != H || flow.width() != W) {
        throw ShapeError("code: frame, reference and flow must share spatial extents");
    }
    if (a.pad == 0 || a.pad % 16 != 0) throw DomainError("code: padding multiple must be a positive multiple of 16");

    const Tensor padded = pad_to_multiple(frame, a.pad);
    const Tensor padded_ref = pad_to_multiple(reference, a.pad);
    const FlowField padded_flow = pad_flow(flow, padded.dim(1), padded.dim(2));
    const CodedFrame coded = code_frame(padded, padded_ref, padded_flow, config, a.frame_index);

    if (!a.recon.empty()) save_pnm(a.recon, crop(coded.reconstruction, H, W));
    if (!a.stats.empty()) {
        std::string text = format_frame_stats_csv({coded.stats});
        if (a.append && fs::exists(a.stats)) {
            text = read_text(a.stats) + text.substr(text.find('\n') + 1);
        }
        write_text(a.stats, text);
    }
    std::cout << "frame " << coded.stats.frame_index << " bpp " << format_number(coded.stats.total_bpp) << " psnr "
              << format_number(coded.stats.psnr) << " rd_loss "
              << format_number(rd_loss(coded.stats.total_bpp, coded.stats.mse, config.lambda)) << "\n";
}

struct BenchArgs {
    std::string tokens = "256,512,1024,2048,4096,8192,16384";
    std::size_t channels = 64, reps = 9, warmup = 2, sweep_tokens = 4096;
    std::string mem_budget = "2G", csv, summary, channel_sweep;
    std::uint64_t seed = 2024;
};

void print_fits(const BenchReport& report) {
    for (const auto& f : report.fits) {
        std::cout << to_string(f.kernel) << " slope(" << report.axis << ") " << format_number(f.fit.slope) << " r2 "
                  << format_number(f.fit.r_squared) << (f.noisy ? " noisy" : "") << "\n";
    }
}

void cmd_bench(const BenchArgs& a) {
    BenchConfig config;
    config.tokens = parse_size_list(a.tokens);
    config.channels = a.channels;
    config.reps = a.reps;
    config.warmup = a.warmup;
    config.memory_budget_bytes = parse_bytes(a.mem_budget);
    config.seed = a.seed;
    BenchReport report = run_attention_scaling(config);
    if (!a.channel_sweep.empty()) {
        BenchReport sweep = run_channel_scaling(config, a.sweep_tokens, parse_size_list(a.channel_sweep));
        print_fits(report);
        print_fits(sweep);
        if (!a.csv.empty()) write_text(a.csv, bench_csv(report) + bench_csv(sweep).substr(bench_csv(sweep).find('\n') + 1));
        if (!a.summary.empty()) write_text(a.summary, bench_summary_json(report));
        if (!a.summary.empty()) write_text(a.summary + ".channels.json", bench_summary_json(sweep));
        return;
    }
    print_fits(report);
    if (!a.csv.empty()) write_text(a.csv, bench_csv(report));
    if (!a.summary.empty()) write_text(a.summary, bench_summary_json(report));
}

struct BdArgs {
    std::string anchor, test, manifest;
};

void cmd_bdrate(const BdArgs& a) {
    if (!a.manifest.empty()) {
        // sequence,class,anchor_csv,test_csv; relative paths resolve against the manifest.
        const fs::path base = fs::path(a.manifest).parent_path();
        std::vector<SequenceCurves> curves;
        std::stringstream ss(read_text(a.manifest));
        std::string line;
        bool header = true;
        while (std::getline(ss, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (header) {
                if (line != "sequence,class,anchor,test") {
                    throw FormatError("manifest header must be 'sequence,class,anchor,test'");
                }
                header = false;
                continue;
            }
            std::vector<std::string> cells;
            std::stringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) cells.push_back(cell);
            if (cells.size() != 4) throw FormatError("manifest rows need 4 columns");
            curves.push_back({cells[0], cells[1], parse_rd_csv(read_text(base / cells[2])),
                              parse_rd_csv(read_text(base / cells[3]))});
        }
        const BdRateSummary summary = summarize_bd_rates(curves);
        std::cout << "scope,name,bd_rate_percent\n";
        for (const auto& [name, bd] : summary.per_sequence) std::cout << "sequence," << name << "," << format_number(bd) << "\n";
        for (const auto& [cls, entry] : summary.per_class) {
            std::cout << "class_mean_of_sequences," << cls << "," << format_number(entry.mean_of_sequences) << "\n";
            std::cout << "class_of_mean_curves," << cls << "," << format_number(entry.of_mean_curves) << "\n";
        }
        return;
    }
    if (a.anchor.empty() || a.test.empty()) throw FormatError("bdrate needs ANCHOR and TEST curves or --manifest");
    std::cout << format_number(bd_rate(parse_rd_csv(read_text(a.anchor)), parse_rd_csv(read_text(a.test)))) << "\n";
}

struct GradArgs {
    std::string kernel = "all";
    std::size_t seeds = 100;
    std::uint64_t seed = 1;
};

bool cmd_gradcheck(const GradArgs& a) {
    std::vector<GradKernel> kernels;
    if (a.kernel == "all") {
        kernels = {GradKernel::matmul, GradKernel::softmax, GradKernel::warp, GradKernel::efficient_attention};
    } else if (auto k = parse_grad_kernel(a.kernel)) {
        kernels = {*k};
    } else {
        throw FormatError("unknown kernel '" + a.kernel + "'");
    }
    bool ok = true;
    std::cout << "kernel,seeds,max_rel_error,tolerance,result\n";
    for (auto k : kernels) {
        const GradcheckResult r = gradcheck(k, a.seeds, a.seed);
        ok = ok && r.passed;
        std::cout << to_string(k) << "," << r.seeds << "," << format_number(r.max_relative_error) << ","
                  << format_number(kGradTolerance) << "," << (r.passed ? "pass" : "FAIL") << "\n";
    }
    return ok;
}

struct SynthArgs {
    std::string kind = "translation", out;
    double tx = 0, ty = 0, theta = 0, zoom = 1;
    std::size_t width = 64, height = 64;
};

void cmd_synthflow(const SynthArgs& a) {
    SynthKind kind;
    if (a.kind == "translation") kind = SynthKind::translation;
    else if (a.kind == "rotation") kind = SynthKind::rotation;
    else if (a.kind == "zoom") kind = SynthKind::zoom;
    else throw FormatError("unknown flow kind '" + a.kind + "'");
    save_flow(a.out, synth_flow(kind, {a.tx, a.ty, a.theta, a.zoom}, a.width, a.height));
}

struct BlockArgs {
    std::string reference, current, out;
    std::size_t block = 8, range = 7;
};

void cmd_blockmatch(const BlockArgs& a) {
    save_flow(a.out, block_match(to_gray(load_map(a.reference)), to_gray(load_map(a.current)), a.block, a.range));
}

struct ReportArgs {
    std::string stats, compare, csv, gnuplot;
};

void cmd_report(const ReportArgs& a) {
    const BitAllocationReport report = bit_allocation_report(parse_frame_stats_csv(read_text(a.stats)));
    std::cout << "frames " << report.frames.size() << " mean_bpp " << format_number(report.mean_bpp)
              << " mean_motion_bpp " << format_number(report.mean_motion_bpp) << " mean_psnr "
              << format_number(report.mean_psnr) << "\n";
    std::string csv = report_csv(report);
    if (!a.compare.empty()) {
        csv = compare_reports_csv(report, bit_allocation_report(parse_frame_stats_csv(read_text(a.compare))));
    }
    if (!a.csv.empty()) write_text(a.csv, csv);
    if (!a.gnuplot.empty()) write_text(a.gnuplot, report_gnuplot(report));
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Joint local/global motion-compensation kernels and analysis tools"};
    app.require_subcommand(1);
    bool checks_passed = true;

    AttendArgs attend;
    auto* s_attend = app.add_subcommand("attend", "Cross-attention between two token matrices");
    s_attend->add_option("query", attend.query, "L_q x C query tensor")->required()->check(CLI::ExistingFile);
    s_attend->add_option("keyvalue", attend.keyvalue, "L_k x C key/value tensor")->required()->check(CLI::ExistingFile);
    s_attend->add_option("-o,--out", attend.out, "Output tensor")->required();
    s_attend->add_option("--variant", attend.variant)->check(CLI::IsMember({"vanilla", "efficient"}));
    s_attend->add_flag("--materialize", attend.materialize, "Also build the efficient similarity (test path)");
    s_attend->add_option("--sim", attend.sim, "Similarity tensor output");
    s_attend->add_option("--cap", attend.cap, "Maximum similarity entries");
    s_attend->callback([&] { cmd_attend(attend); });

    WarpArgs warp;
    auto* s_warp = app.add_subcommand("warp", "Bilinear backward warp of a C x H x W tensor");
    s_warp->add_option("feature", warp.feature)->required()->check(CLI::ExistingFile);
    s_warp->add_option("flow", warp.flow)->required()->check(CLI::ExistingFile);
    s_warp->add_option("-o,--out", warp.out)->required();
    s_warp->callback([&] { cmd_warp(warp); });

    CodeArgs code;
    auto* s_code = app.add_subcommand("code", "Code one P-frame with the conditional codec");
    s_code->add_option("frame", code.frame, "Current frame (P6)")->required()->check(CLI::ExistingFile);
    s_code->add_option("reference", code.reference, "Reference feature (.tensor or .ppm)")->required()->check(CLI::ExistingFile);
    s_code->add_option("flow", code.flow, "Motion field (.flo)")->required()->check(CLI::ExistingFile);
    s_code->add_option("--mode", code.mode)
        ->check(CLI::IsMember({"both", "local_only", "global_only", "global_enc_only", "global_dec_only"}));
    s_code->add_option("--lambda", code.lambda);
    s_code->add_option("--seed", code.seed);
    s_code->add_option("--recon", code.recon, "Reconstruction output (P6)");
    s_code->add_option("--stats", code.stats, "Frame statistics CSV");
    s_code->add_option("--frame-index", code.frame_index);
    s_code->add_option("--pad", code.pad, "Pad extents to this multiple");
    s_code->add_flag("--append", code.append, "Append to an existing stats CSV");
    s_code->callback([&] { cmd_code(code); });

    BenchArgs bench;
    auto* s_bench = app.add_subcommand("bench", "Attention scaling benchmark (single-threaded)");
    s_bench->add_option("--Ls", bench.tokens, "Comma-separated token counts");
    s_bench->add_option("--C", bench.channels);
    s_bench->add_option("--reps", bench.reps);
    s_bench->add_option("--warmup", bench.warmup);
    s_bench->add_option("--mem-budget", bench.mem_budget, "Vanilla memory budget, e.g. 2G");
    s_bench->add_option("--seed", bench.seed);
    s_bench->add_option("--csv", bench.csv);
    s_bench->add_option("--summary", bench.summary);
    s_bench->add_option("--channel-sweep", bench.channel_sweep, "Comma-separated channel counts");
    s_bench->add_option("--sweep-L", bench.sweep_tokens);
    s_bench->callback([&] { cmd_bench(bench); });

    BdArgs bd;
    auto* s_bd = app.add_subcommand("bdrate", "Bjontegaard delta rate (percent) of TEST against ANCHOR");
    s_bd->add_option("anchor", bd.anchor)->check(CLI::ExistingFile);
    s_bd->add_option("test", bd.test)->check(CLI::ExistingFile);
    s_bd->add_option("--manifest", bd.manifest, "sequence,class,anchor,test CSV")->check(CLI::ExistingFile);
    s_bd->callback([&] { cmd_bdrate(bd); });

    GradArgs grad;
    auto* s_grad = app.add_subcommand("gradcheck", "Finite-difference check of the backward kernels");
    s_grad->add_option("--kernel", grad.kernel, "softmax|matmul|warp|efficient_attention|all");
    s_grad->add_option("--seeds", grad.seeds);
    s_grad->add_option("--seed", grad.seed);
    s_grad->callback([&] { checks_passed = cmd_gradcheck(grad); });

    SynthArgs synth;
    auto* s_synth = app.add_subcommand("synthflow", "Write a synthetic motion field");
    s_synth->add_option("--kind", synth.kind, "translation|rotation|zoom");
    s_synth->add_option("--tx", synth.tx);
    s_synth->add_option("--ty", synth.ty);
    s_synth->add_option("--theta", synth.theta);
    s_synth->add_option("--zoom", synth.zoom);
    s_synth->add_option("--width", synth.width);
    s_synth->add_option("--height", synth.height);
    s_synth->add_option("-o,--out", synth.out)->required();
    s_synth->callback([&] { cmd_synthflow(synth); });

    BlockArgs block;
    auto* s_block = app.add_subcommand("blockmatch", "Full-search block matching");
    s_block->add_option("reference", block.reference)->required()->check(CLI::ExistingFile);
    s_block->add_option("current", block.current)->required()->check(CLI::ExistingFile);
    s_block->add_option("--block", block.block);
    s_block->add_option("--range", block.range);
    s_block->add_option("-o,--out", block.out)->required();
    s_block->callback([&] { cmd_blockmatch(block); });

    ReportArgs report;
    auto* s_report = app.add_subcommand("report", "Bit-allocation report from a stats CSV");
    s_report->add_option("stats", report.stats)->required()->check(CLI::ExistingFile);
    s_report->add_option("--compare", report.compare, "Second stats CSV for delta columns")->check(CLI::ExistingFile);
    s_report->add_option("--csv", report.csv);
    s_report->add_option("--gnuplot", report.gnuplot);
    s_report->callback([&] { cmd_report(report); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kFormat;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kFormat;
    } catch (const ShapeError& e) {
        std::cerr << "shape error: " << e.what() << "\n";
        return kShape;
    } catch (const ResourceError& e) {
        std::cerr << "resource error: " << e.what() << "\n";
        return kResource;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return kDomain;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return checks_passed ? kOk : kFailure;
}

}  // namespace lgmc::cli
