#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "lgmc/attention.hpp"
#include "lgmc/metrics.hpp"
#include "lgmc/motion.hpp"
#include "lgmc/tensor.hpp"

namespace lgmc {

// Which context families condition the codec.
//   both             local + global at encoder and decoder
//   local_only       flow-warped contexts only
//   global_only      attention contexts only, both sides
//   global_enc_only  local + global at the encoder only
//   global_dec_only  local + global at the decoder only
enum class AblationMode { both, local_only, global_only, global_enc_only, global_dec_only };

struct ContextInclusion {
    bool local = false;
    bool global_enc = false;
    bool global_dec = false;
};

ContextInclusion inclusion(AblationMode mode);
std::string_view to_string(AblationMode mode);
std::optional<AblationMode> parse_ablation_mode(std::string_view name);

struct ChannelPlan {
    std::array<std::size_t, 3> context{16, 24, 32};  // C0, C1, C2
    std::size_t hidden = 32;
    std::size_t latent = 96;
};

struct CodecConfig {
    double lambda = 1024.0;
    AblationMode mode = AblationMode::both;
    ChannelPlan channels;
    std::uint64_t seed = 1;
    double sigma = 1.0;          // scale of the Gaussian rate model
    double quant_step = 1.0 / 16.0;  // encoder output is divided by this before rounding
    double residual_gain = 0.1;  // weight of the decoder head over the context pass-through

    void validate() const;
};

struct Latent {
    Tensor quantized;  // integral values stored as reals
    Tensor pre_quant;
};

// Round half away from zero.
Tensor quantize(const Tensor& pre);

// Σ -log2 P(k) with P(k) = Φ((k+½)/σ) - Φ((k-½)/σ).
double estimate_rate(const Latent& latent, double sigma);

struct Conv2d {
    Tensor weight;  // Cout×Cin×k×k
    Tensor bias;    // Cout
    std::size_t stride = 1;

    std::size_t out_channels() const { return weight.dim(0); }
    std::size_t in_channels() const { return weight.dim(1); }
    std::size_t kernel() const { return weight.dim(2); }
};

// Zero-padded convolution with padding kernel/2.
Tensor conv2d(const Tensor& input, const Conv2d& conv);
Tensor upsample_nearest2(const Tensor& input);

// Seeded weights of the contextual encoder/decoder. Everything derives from
// config.seed; the global-context embeddings are shared by both sides.
struct CodecWeights {
    std::array<Conv2d, 4> encoder;
    std::array<Conv2d, 4> decoder;  // upsampling stages
    Conv2d head;
    std::array<Conv2d, 3> encoder_query;  // middle feature -> C_s, 1×1
    std::array<Conv2d, 3> decoder_query;
    std::array<EmbedParams, 3> embed;
    PyramidConfig pyramid;

    static CodecWeights seeded(const CodecConfig& config);
};

// Encoder-side and decoder-side contexts. `local` holds the warped pyramid
// levels; the global references are the pyramid levels attention reads from.
struct CodecContexts {
    std::array<Tensor, 3> local;
    FeaturePyramid global_enc;
    FeaturePyramid global_dec;
};

class ConditionalCodec {
public:
    explicit ConditionalCodec(CodecConfig config);

    const CodecConfig& config() const { return config_; }
    const CodecWeights& weights() const { return weights_; }

    // frame: 3×H×W with H, W multiples of 16. Returns the pre-quantization
    // latent in units of the quantization step.
    Tensor encode(const Tensor& frame, const CodecContexts& contexts) const;
    // Output is 3×(16·h)×(16·w), clamped to [0, 1].
    Tensor decode(const Latent& latent, const CodecContexts& contexts) const;

    // Pyramid from the reference feature, warped local contexts, global
    // references for both sides.
    CodecContexts build_contexts(const Tensor& reference_feature, const FlowField& flow) const;

private:
    CodecConfig config_;
    CodecWeights weights_;
};

struct CodedFrame {
    Tensor reconstruction;
    Latent latent;
    FrameStats stats;
};

CodedFrame code_frame(const ConditionalCodec& codec, const Tensor& frame, const Tensor& reference_feature,
                      const FlowField& flow, std::size_t frame_index = 0);

CodedFrame code_frame(const Tensor& frame, const Tensor& reference_feature, const FlowField& flow,
                      const CodecConfig& config, std::size_t frame_index = 0);

}  // namespace lgmc
