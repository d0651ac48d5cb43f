#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "lgmc/attention.hpp"
#include "lgmc/bench.hpp"
#include "lgmc/codec.hpp"
#include "lgmc/errors.hpp"
#include "lgmc/gradcheck.hpp"
#include "lgmc/metrics.hpp"
#include "lgmc/motion.hpp"
#include "lgmc/tensor_io.hpp"

namespace py = pybind11;
using namespace lgmc;

namespace {

using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

template <class T, class Array>
BasicTensor<T> to_tensor(const Array& a) {
    Shape dims(a.shape(), a.shape() + a.ndim());
    return BasicTensor<T>(dims, std::span<const T>(a.data(), static_cast<std::size_t>(a.size())));
}

template <class T>
py::array_t<T> to_array(const BasicTensor<T>& t) {
    std::vector<py::ssize_t> shape(t.dims().begin(), t.dims().end());
    py::array_t<T> out(shape);
    std::memcpy(out.mutable_data(), t.data(), t.size() * sizeof(T));
    return out;
}

// Flow fields cross the boundary as H×W×2 arrays, (u, v) last.
FlowField to_flow(const F32Array& a) {
    if (a.ndim() != 3 || a.shape(2) != 2) throw ShapeError("flow must be an H x W x 2 array");
    FlowField f(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)));
    std::memcpy(f.values().data(), a.data(), f.values().size() * sizeof(float));
    return f;
}

py::array_t<float> from_flow(const FlowField& f) {
    py::array_t<float> out({static_cast<py::ssize_t>(f.height()), static_cast<py::ssize_t>(f.width()),
                            py::ssize_t{2}});
    std::memcpy(out.mutable_data(), f.values().data(), f.values().size() * sizeof(float));
    return out;
}

std::vector<RdPoint> to_curve(const std::vector<std::pair<double, double>>& pts) {
    std::vector<RdPoint> out;
    for (const auto& [rate, quality] : pts) out.push_back({rate, quality});
    return out;
}

py::dict stats_dict(const FrameStats& s) {
    py::dict d;
    d["frame_index"] = s.frame_index;
    d["total_bpp"] = s.total_bpp;
    d["motion_bpp"] = s.motion_bpp;
    d["mse"] = s.mse;
    d["psnr"] = s.psnr;
    return d;
}

AblationMode mode_from(const std::string& name) {
    const auto m = parse_ablation_mode(name);
    if (!m) throw DomainError("unknown ablation mode '" + name + "'");
    return *m;
}

}  // namespace

PYBIND11_MODULE(_lgmc, m) {
    m.doc() = "Local and global motion compensation kernels";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<ResourceError>(m, "ResourceError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<EvaluationError>(m, "EvaluationError", base.ptr());

    m.def(
        "efficient_attention",
        [](const F32Array& q, const F32Array& kv) {
            return to_array(efficient_cross_attention(AttentionInputs(to_tensor<float>(q), to_tensor<float>(kv))));
        },
        py::arg("query"), py::arg("keyvalue"));
    m.def(
        "vanilla_attention",
        [](const F32Array& q, const F32Array& kv) {
            auto r = vanilla_cross_attention(AttentionInputs(to_tensor<float>(q), to_tensor<float>(kv)));
            return py::make_tuple(to_array(r.output), to_array(r.similarity));
        },
        py::arg("query"), py::arg("keyvalue"));
    m.def(
        "efficient_similarity",
        [](const F32Array& q, const F32Array& kv, std::size_t cap) {
            return to_array(
                materialize_efficient_similarity(AttentionInputs(to_tensor<float>(q), to_tensor<float>(kv)), cap));
        },
        py::arg("query"), py::arg("keyvalue"), py::arg("cap") = kDefaultSimilarityCap);
    m.def(
        "efficient_attention_backward",
        [](const F64Array& q, const F64Array& kv, const F64Array& d_out) {
            auto g = efficient_attention_backward(AttentionInputs64(to_tensor<double>(q), to_tensor<double>(kv)),
                                                  to_tensor<double>(d_out));
            return py::make_tuple(to_array(g.d_query), to_array(g.d_keyvalue));
        },
        py::arg("query"), py::arg("keyvalue"), py::arg("d_out"));

    m.def(
        "warp", [](const F32Array& feature, const F32Array& flow) {
            return to_array(bilinear_warp(to_tensor<float>(feature), to_flow(flow)));
        },
        py::arg("feature"), py::arg("flow"));
    m.def(
        "synth_flow",
        [](const std::string& kind, std::size_t width, std::size_t height, double tx, double ty, double theta,
           double zoom) {
            SynthKind k;
            if (kind == "translation") k = SynthKind::translation;
            else if (kind == "rotation") k = SynthKind::rotation;
            else if (kind == "zoom") k = SynthKind::zoom;
            else throw DomainError("unknown flow kind '" + kind + "'");
            return from_flow(synth_flow(k, {tx, ty, theta, zoom}, width, height));
        },
        py::arg("kind"), py::arg("width"), py::arg("height"), py::arg("tx") = 0.0, py::arg("ty") = 0.0,
        py::arg("theta") = 0.0, py::arg("zoom") = 1.0);
    m.def(
        "block_match",
        [](const F32Array& ref, const F32Array& cur, std::size_t block, std::size_t range) {
            return from_flow(block_match(to_tensor<float>(ref), to_tensor<float>(cur), block, range));
        },
        py::arg("reference"), py::arg("current"), py::arg("block") = 8, py::arg("range") = 7);
    m.def(
        "encode_flow",
        [](const F32Array& flow) {
            const auto bytes = encode_flow(to_flow(flow));
            return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        },
        py::arg("flow"));
    m.def(
        "decode_flow",
        [](const py::bytes& b) {
            const std::string s = b;
            return from_flow(decode_flow({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}));
        },
        py::arg("data"));

    m.def("mse", [](const F32Array& a, const F32Array& b) { return mse(to_tensor<float>(a), to_tensor<float>(b)); });
    m.def(
        "psnr", [](const F32Array& a, const F32Array& b, double peak) {
            return psnr(to_tensor<float>(a), to_tensor<float>(b), peak);
        },
        py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
    m.def(
        "ms_ssim", [](const F32Array& a, const F32Array& b, double peak) {
            return ms_ssim(to_tensor<float>(a), to_tensor<float>(b), peak);
        },
        py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
    m.def("rd_loss", &rd_loss, py::arg("rate_bpp"), py::arg("distortion"), py::arg("lam"));
    m.def(
        "bd_rate",
        [](const std::vector<std::pair<double, double>>& anchor, const std::vector<std::pair<double, double>>& test) {
            return bd_rate(to_curve(anchor), to_curve(test));
        },
        py::arg("anchor"), py::arg("test"), "Curves are lists of (rate_bpp, quality).");

    m.def(
        "fit_loglog_slope",
        [](const std::vector<std::pair<double, double>>& points) {
            const auto f = fit_loglog_slope(points);
            return py::make_tuple(f.slope, f.intercept, f.r_squared);
        },
        py::arg("points"));

    m.def("quantize", [](const F32Array& a) { return to_array(quantize(to_tensor<float>(a))); });
    m.def(
        "estimate_rate",
        [](const F32Array& quantized, double sigma) {
            const auto q = to_tensor<float>(quantized);
            return estimate_rate(Latent{q, q}, sigma);
        },
        py::arg("quantized"), py::arg("sigma") = 1.0);
    m.def(
        "code_frame",
        [](const F32Array& frame, const F32Array& reference, const F32Array& flow, const std::string& mode,
           double lambda, std::uint64_t seed, std::size_t frame_index) {
            CodecConfig cfg;
            cfg.mode = mode_from(mode);
            cfg.lambda = lambda;
            cfg.seed = seed;
            const auto coded = code_frame(to_tensor<float>(frame), to_tensor<float>(reference), to_flow(flow), cfg,
                                          frame_index);
            return py::make_tuple(to_array(coded.reconstruction), to_array(coded.latent.quantized),
                                  stats_dict(coded.stats));
        },
        py::arg("frame"), py::arg("reference"), py::arg("flow"), py::arg("mode") = "both",
        py::arg("lam") = 1024.0, py::arg("seed") = 1, py::arg("frame_index") = 0);

    m.def(
        "gradcheck",
        [](const std::string& kernel, std::size_t seeds, std::uint64_t seed) {
            const auto k = parse_grad_kernel(kernel);
            if (!k) throw DomainError("unknown kernel '" + kernel + "'");
            const auto r = gradcheck(*k, seeds, seed);
            py::dict d;
            d["kernel"] = std::string(to_string(r.kernel));
            d["seeds"] = r.seeds;
            d["max_relative_error"] = r.max_relative_error;
            d["passed"] = r.passed;
            return d;
        },
        py::arg("kernel"), py::arg("seeds") = 100, py::arg("seed") = 1);
}
