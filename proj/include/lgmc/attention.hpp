#pragma once

#include <cstddef>
#include <cstdint>

#include "lgmc/tensor.hpp"

namespace lgmc {

// Query tokens (L_q×C) attending over key/value tokens (L_k×C). The same
// matrix serves as key and value.
template <class T>
struct BasicAttentionInputs {
    BasicTensor<T> query;
    BasicTensor<T> keyvalue;

    BasicAttentionInputs(BasicTensor<T> q, BasicTensor<T> kv);

    std::size_t query_tokens() const { return query.dim(0); }
    std::size_t key_tokens() const { return keyvalue.dim(0); }
    std::size_t channels() const { return query.dim(1); }
};

using AttentionInputs = BasicAttentionInputs<float>;
using AttentionInputs64 = BasicAttentionInputs<double>;

template <class T>
struct VanillaAttention {
    BasicTensor<T> output;      // L_q×C
    BasicTensor<T> similarity;  // L_q×L_k, row-stochastic
};

// softmax_rows(q·kvᵀ)·kv. Materializes the full L_q×L_k similarity.
template <class T>
VanillaAttention<T> vanilla_cross_attention(const BasicAttentionInputs<T>& inp);

// softmax_rows(q)·(softmax_cols(kv)ᵀ·kv). The C×C product is formed first, so
// no L_q×L_k buffer is ever allocated.
template <class T>
BasicTensor<T> efficient_cross_attention(const BasicAttentionInputs<T>& inp);

inline constexpr std::size_t kDefaultSimilarityCap = std::size_t{1} << 24;

// softmax_rows(q)·softmax_cols(kv)ᵀ, the similarity the efficient form never
// builds. Throws ResourceError if L_q·L_k exceeds max_entries.
template <class T>
BasicTensor<T> materialize_efficient_similarity(const BasicAttentionInputs<T>& inp,
                                                std::size_t max_entries = kDefaultSimilarityCap);

template <class T>
struct AttentionGrad {
    BasicTensor<T> d_query;
    BasicTensor<T> d_keyvalue;
};

template <class T>
AttentionGrad<T> efficient_attention_backward(const BasicAttentionInputs<T>& inp,
                                              const BasicTensor<T>& d_out);

// ---------------------------------------------------------------------------
// Residual bottleneck embedding: 1×1 conv C→C/2, 3×3 depthwise conv, leaky
// ReLU (0.01), 1×1 conv C/2→C, added to the input.
// ---------------------------------------------------------------------------

struct EmbedParams {
    std::size_t channels = 0;
    std::size_t hidden = 0;
    std::uint64_t seed = 0;
    Tensor reduce_weight;     // hidden×C
    Tensor reduce_bias;       // hidden
    Tensor depthwise_weight;  // hidden×9
    Tensor depthwise_bias;    // hidden
    Tensor expand_weight;     // C×hidden
    Tensor expand_bias;       // C

    // Weights drawn from uniform(-0.1, 0.1); same seed, same bits.
    static EmbedParams seeded(std::size_t channels, std::uint64_t seed);
    // All-zero branch: the embedding is the identity.
    static EmbedParams zeros(std::size_t channels);
};

struct GridShape {
    std::size_t height = 1;
    std::size_t width = 1;
};

// tokens is (height·width)×C in raster order.
Tensor drb_embed(const Tensor& tokens, const EmbedParams& params, GridShape grid);

// Treats the tokens as a single raster row (1×L grid).
Tensor drb_embed(const Tensor& tokens, const EmbedParams& params);

// C×H×W map <-> (H·W)×C token matrix.
template <class T>
BasicTensor<T> map_to_tokens(const BasicTensor<T>& map);
template <class T>
BasicTensor<T> tokens_to_map(const BasicTensor<T>& tokens, std::size_t height, std::size_t width);

// Global context at one scale: embed both maps, attend with the embedded middle
// feature as query and the embedded propagated feature as key/value.
Tensor global_context(const Tensor& middle, const Tensor& propagated, const EmbedParams& params);

}  // namespace lgmc
