#include "lgmc/codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lgmc/rng.hpp"

namespace lgmc {

ContextInclusion inclusion(AblationMode mode) {
    switch (mode) {
        case AblationMode::both: return {true, true, true};
        case AblationMode::local_only: return {true, false, false};
        case AblationMode::global_only: return {false, true, true};
        case AblationMode::global_enc_only: return {true, true, false};
        case AblationMode::global_dec_only: return {true, false, true};
    }
    return {};
}

std::string_view to_string(AblationMode mode) {
    switch (mode) {
        case AblationMode::both: return "both";
        case AblationMode::local_only: return "local_only";
        case AblationMode::global_only: return "global_only";
        case AblationMode::global_enc_only: return "global_enc_only";
        case AblationMode::global_dec_only: return "global_dec_only";
    }
    return "?";
}

std::optional<AblationMode> parse_ablation_mode(std::string_view name) {
    for (auto m : {AblationMode::both, AblationMode::local_only, AblationMode::global_only,
                   AblationMode::global_enc_only, AblationMode::global_dec_only}) {
        if (to_string(m) == name) return m;
    }
    return std::nullopt;
}

void CodecConfig::validate() const {
    if (!(lambda > 0.0)) throw DomainError("codec: lambda must be positive");
    if (!(sigma > 0.0)) throw DomainError("codec: rate-model sigma must be positive");
    if (!(quant_step > 0.0) || !std::isfinite(quant_step)) {
        throw DomainError("codec: quantization step must be positive");
    }
    if (channels.hidden == 0 || channels.latent == 0 ||
        std::any_of(channels.context.begin(), channels.context.end(), [](auto c) { return c == 0; })) {
        throw ShapeError("codec: channel counts must be positive");
    }
}

Tensor quantize(const Tensor& pre) {
    Tensor out = pre;
    for (auto& v : out.values()) v = std::round(v);
    return out;
}

double estimate_rate(const Latent& latent, double sigma) {
    if (!(sigma > 0.0)) throw DomainError("estimate_rate: sigma must be positive");
    const double scale = 1.0 / (sigma * std::sqrt(2.0));
    double bits = 0.0;
    for (float q : latent.quantized.values()) {
        const double k = std::abs(static_cast<double>(q));
        // Upper-tail form keeps precision for large |k|.
        double p = 0.5 * (std::erfc((k - 0.5) * scale) - std::erfc((k + 0.5) * scale));
        p = std::max(p, std::numeric_limits<double>::min());
        bits -= std::log2(p);
    }
    return bits;
}

Tensor conv2d(const Tensor& input, const Conv2d& conv) {
    require_rank(input, 3, "conv2d");
    const std::size_t Cin = input.dim(0), H = input.dim(1), W = input.dim(2);
    if (Cin != conv.in_channels()) {
        throw ShapeError("conv2d: input " + shape_string(input.dims()) + " vs weight " +
                         shape_string(conv.weight.dims()));
    }
    const std::size_t K = conv.kernel(), S = conv.stride, Cout = conv.out_channels();
    const auto pad = static_cast<std::ptrdiff_t>(K / 2);
    const std::size_t Ho = (H + S - 1) / S, Wo = (W + S - 1) / S;
    Tensor out(Shape{Cout, Ho, Wo});
    for (std::size_t co = 0; co < Cout; ++co) {
        float* dst = out.data() + co * Ho * Wo;
        std::fill(dst, dst + Ho * Wo, conv.bias[co]);
        for (std::size_t ci = 0; ci < Cin; ++ci) {
            const float* src = input.data() + ci * H * W;
            for (std::size_t ky = 0; ky < K; ++ky) {
                for (std::size_t kx = 0; kx < K; ++kx) {
                    const float w = conv.weight[((co * Cin + ci) * K + ky) * K + kx];
                    for (std::size_t oy = 0; oy < Ho; ++oy) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * S + ky) - pad;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                        const float* srow = src + static_cast<std::size_t>(iy) * W;
                        float* drow = dst + oy * Wo;
                        for (std::size_t ox = 0; ox < Wo; ++ox) {
                            const auto ix = static_cast<std::ptrdiff_t>(ox * S + kx) - pad;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                            drow[ox] += w * srow[ix];
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor upsample_nearest2(const Tensor& input) {
    require_rank(input, 3, "upsample_nearest2");
    const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
    Tensor out(Shape{C, 2 * H, 2 * W});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < 2 * H; ++y)
            for (std::size_t x = 0; x < 2 * W; ++x) out(c, y, x) = input(c, y / 2, x / 2);
    return out;
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

Conv2d seeded_conv(Rng& rng, std::size_t cin, std::size_t cout, std::size_t kernel, std::size_t stride) {
    Conv2d c{Tensor(Shape{cout, cin, kernel, kernel}), Tensor(Shape{cout}), stride};
    const double k = 1.0 / std::sqrt(static_cast<double>(cin * kernel * kernel));
    for (auto& v : c.weight.values()) v = static_cast<float>(rng.uniform(-k, k));
    for (auto& v : c.bias.values()) v = static_cast<float>(rng.uniform(-k, k));
    return c;
}

void leaky_relu_inplace(Tensor& t) {
    for (auto& v : t.values()) v = v > 0.0f ? v : 0.01f * v;
}

Tensor zeros_like_spatial(std::size_t channels, const Tensor& like) {
    return Tensor(Shape{channels, like.dim(1), like.dim(2)});
}

Tensor concat3(const Tensor& a, const Tensor& b, const Tensor& c) {
    const std::array<Tensor, 3> parts{a, b, c};
    return concat_channels(std::span<const Tensor>(parts));
}

}  // namespace

CodecWeights CodecWeights::seeded(const CodecConfig& config) {
    config.validate();
    const auto& ch = config.channels;
    const std::size_t N = ch.hidden;
    const auto& C = ch.context;
    CodecWeights w;
    Rng enc(derive_seed(config.seed, 1));
    w.encoder[0] = seeded_conv(enc, 3 + 2 * C[0], N, 3, 2);
    w.encoder[1] = seeded_conv(enc, N + 2 * C[1], N, 3, 2);
    w.encoder[2] = seeded_conv(enc, N + 2 * C[2], N, 3, 2);
    w.encoder[3] = seeded_conv(enc, N, ch.latent, 3, 2);

    Rng dec(derive_seed(config.seed, 2));
    w.decoder[0] = seeded_conv(dec, ch.latent, N, 3, 1);
    w.decoder[1] = seeded_conv(dec, N, N, 3, 1);
    w.decoder[2] = seeded_conv(dec, N + 2 * C[2], N, 3, 1);
    w.decoder[3] = seeded_conv(dec, N + 2 * C[1], N, 3, 1);
    w.head = seeded_conv(dec, N + 2 * C[0], 3, 3, 1);

    Rng query(derive_seed(config.seed, 3));
    for (std::size_t s = 0; s < 3; ++s) {
        w.encoder_query[s] = seeded_conv(query, s == 0 ? 3 : N, C[s], 1, 1);
        w.decoder_query[s] = seeded_conv(query, N, C[s], 1, 1);
        w.embed[s] = EmbedParams::seeded(C[s], derive_seed(config.seed, 10 + s));
    }
    w.pyramid = PyramidConfig{C, derive_seed(config.seed, 4)};
    return w;
}

ConditionalCodec::ConditionalCodec(CodecConfig config)
    : config_(config), weights_(CodecWeights::seeded(config)) {}

CodecContexts ConditionalCodec::build_contexts(const Tensor& reference_feature, const FlowField& flow) const {
    FeaturePyramid pyramid = build_pyramid(reference_feature, weights_.pyramid);
    CodecContexts ctx;
    ctx.local = local_contexts(pyramid, flow);
    ctx.global_enc = pyramid;
    ctx.global_dec = std::move(pyramid);
    return ctx;
}

namespace {

void require_context_shapes(const CodecContexts& ctx, const ChannelPlan& plan, std::size_t H, std::size_t W) {
    for (std::size_t s = 0; s < 3; ++s) {
        const Shape want{plan.context[s], H >> s, W >> s};
        for (const Tensor* t : {&ctx.local[s], &ctx.global_enc.levels[s], &ctx.global_dec.levels[s]}) {
            if (t->dims() != want) {
                throw ShapeError("codec: scale " + std::to_string(s) + " context " + shape_string(t->dims()) +
                                 " does not match plan " + shape_string(want));
            }
        }
    }
}

}  // namespace

Tensor ConditionalCodec::encode(const Tensor& frame, const CodecContexts& contexts) const {
    require_rank(frame, 3, "encode");
    const std::size_t H = frame.dim(1), W = frame.dim(2);
    if (frame.dim(0) != 3 || H % 16 != 0 || W % 16 != 0) {
        throw ShapeError("encode: frame " + shape_string(frame.dims()) + " must be 3xHxW with H, W multiples of 16");
    }
    require_context_shapes(contexts, config_.channels, H, W);
    const ContextInclusion inc = inclusion(config_.mode);
    const auto& C = config_.channels.context;

    Tensor x = frame;
    for (std::size_t s = 0; s < 3; ++s) {
        Tensor local = inc.local ? contexts.local[s] : zeros_like_spatial(C[s], x);
        Tensor global = inc.global_enc
                            ? global_context(conv2d(x, weights_.encoder_query[s]), contexts.global_enc.levels[s],
                                             weights_.embed[s])
                            : zeros_like_spatial(C[s], x);
        x = conv2d(concat3(x, local, global), weights_.encoder[s]);
        leaky_relu_inplace(x);
    }
    return scale(conv2d(x, weights_.encoder[3]), static_cast<float>(1.0 / config_.quant_step));
}

Tensor ConditionalCodec::decode(const Latent& latent, const CodecContexts& contexts) const {
    require_rank(latent.quantized, 3, "decode");
    if (latent.quantized.dim(0) != config_.channels.latent) {
        throw ShapeError("decode: latent " + shape_string(latent.quantized.dims()) + " does not have " +
                         std::to_string(config_.channels.latent) + " channels");
    }
    const std::size_t H = latent.quantized.dim(1) * 16, W = latent.quantized.dim(2) * 16;
    require_context_shapes(contexts, config_.channels, H, W);
    const ContextInclusion inc = inclusion(config_.mode);
    const auto& C = config_.channels.context;

    auto global_at = [&](const Tensor& y, std::size_t s) {
        return inc.global_dec ? global_context(conv2d(y, weights_.decoder_query[s]), contexts.global_dec.levels[s],
                                               weights_.embed[s])
                              : zeros_like_spatial(C[s], y);
    };
    auto local_at = [&](const Tensor& y, std::size_t s) {
        return inc.local ? contexts.local[s] : zeros_like_spatial(C[s], y);
    };

    Tensor y = scale(latent.quantized, static_cast<float>(config_.quant_step));
    for (std::size_t stage = 0; stage < 4; ++stage) {
        // Stages 2 and 3 consume the scale-2 and scale-1 contexts.
        if (stage >= 2) {
            const std::size_t s = 4 - stage;
            y = concat3(y, local_at(y, s), global_at(y, s));
        }
        y = conv2d(upsample_nearest2(y), weights_.decoder[stage]);
        leaky_relu_inplace(y);
    }
    const Tensor local0 = local_at(y, 0);
    Tensor out = conv2d(concat3(y, local0, global_at(y, 0)), weights_.head);

    // The head refines a prediction read from the leading local-context channels.
    const auto gain = static_cast<float>(config_.residual_gain);
    const std::size_t plane = H * W;
    const std::size_t passthrough = std::min<std::size_t>(3, C[0]);
    for (std::size_t c = 0; c < 3; ++c) {
        float* o = out.data() + c * plane;
        const float* pred = c < passthrough ? local0.data() + c * plane : nullptr;
        for (std::size_t p = 0; p < plane; ++p) {
            const float v = gain * o[p] + (pred ? pred[p] : 0.0f);
            o[p] = std::clamp(v, 0.0f, 1.0f);
        }
    }
    return out;
}

CodedFrame code_frame(const ConditionalCodec& codec, const Tensor& frame, const Tensor& reference_feature,
                      const FlowField& flow, std::size_t frame_index) {
    const CodecContexts contexts = codec.build_contexts(reference_feature, flow);
    Latent latent;
    latent.pre_quant = codec.encode(frame, contexts);
    latent.quantized = quantize(latent.pre_quant);
    Tensor recon = codec.decode(latent, contexts);

    const double bits = estimate_rate(latent, codec.config().sigma);
    FrameStats stats;
    stats.frame_index = frame_index;
    stats.total_bpp = bits / static_cast<double>(frame.dim(1) * frame.dim(2));
    stats.motion_bpp = 0.0;
    stats.mse = mse(frame, recon);
    stats.psnr = psnr(frame, recon, 1.0);
    return {std::move(recon), std::move(latent), stats};
}

CodedFrame code_frame(const Tensor& frame, const Tensor& reference_feature, const FlowField& flow,
                      const CodecConfig& config, std::size_t frame_index) {
    return code_frame(ConditionalCodec(config), frame, reference_feature, flow, frame_index);
}

}  // namespace lgmc
