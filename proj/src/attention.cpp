#include "lgmc/attention.hpp"

#include <algorithm>
#include <string>

#include "lgmc/rng.hpp"

namespace lgmc {

template <class T>
BasicAttentionInputs<T>::BasicAttentionInputs(BasicTensor<T> q, BasicTensor<T> kv)
    : query(std::move(q)), keyvalue(std::move(kv)) {
    require_rank(query, 2, "attention query");
    require_rank(keyvalue, 2, "attention key/value");
    if (query.dim(1) != keyvalue.dim(1)) {
        throw ShapeError("attention: channel mismatch between query " + shape_string(query.dims()) +
                         " and key/value " + shape_string(keyvalue.dims()));
    }
    if (!query.all_finite() || !keyvalue.all_finite()) {
        throw DomainError("attention: inputs must be finite");
    }
}

template <class T>
VanillaAttention<T> vanilla_cross_attention(const BasicAttentionInputs<T>& inp) {
    BasicTensor<T> similarity = matmul(inp.query, transpose(inp.keyvalue));
    softmax_rows_inplace(similarity);
    BasicTensor<T> output = matmul(similarity, inp.keyvalue);
    return {std::move(output), std::move(similarity)};
}

template <class T>
BasicTensor<T> efficient_cross_attention(const BasicAttentionInputs<T>& inp) {
    const BasicTensor<T> context = matmul(transpose(softmax_cols(inp.keyvalue)), inp.keyvalue);
    return matmul(softmax_rows(inp.query), context);
}

template <class T>
BasicTensor<T> materialize_efficient_similarity(const BasicAttentionInputs<T>& inp,
                                                std::size_t max_entries) {
    const std::size_t lq = inp.query_tokens(), lk = inp.key_tokens();
    if (lk != 0 && lq > max_entries / lk) {
        throw ResourceError("materialized similarity would hold " + std::to_string(lq) + "x" +
                            std::to_string(lk) + " entries, cap is " + std::to_string(max_entries));
    }
    return matmul(softmax_rows(inp.query), transpose(softmax_cols(inp.keyvalue)));
}

template <class T>
AttentionGrad<T> efficient_attention_backward(const BasicAttentionInputs<T>& inp,
                                              const BasicTensor<T>& d_out) {
    if (d_out.dims() != inp.query.dims()) {
        throw ShapeError("efficient_attention_backward: d_out " + shape_string(d_out.dims()) +
                         " does not match output " + shape_string(inp.query.dims()));
    }
    // Forward: out = Sq·M with Sq = softmax_rows(q), M = Skᵀ·kv, Sk = softmax_cols(kv).
    const BasicTensor<T> sq = softmax_rows(inp.query);
    const BasicTensor<T> sk = softmax_cols(inp.keyvalue);
    const BasicTensor<T> sk_t = transpose(sk);
    const BasicTensor<T> context = matmul(sk_t, inp.keyvalue);

    const MatmulGrad<T> outer = matmul_backward(sq, context, d_out);
    BasicTensor<T> d_query = softmax_rows_backward(sq, outer.d_a);

    const MatmulGrad<T> inner = matmul_backward(sk_t, inp.keyvalue, outer.d_b);
    const BasicTensor<T> d_from_softmax = softmax_cols_backward(sk, transpose(inner.d_a));
    BasicTensor<T> d_keyvalue = add(inner.d_b, d_from_softmax);
    return {std::move(d_query), std::move(d_keyvalue)};
}

// ---------------------------------------------------------------------------

EmbedParams EmbedParams::zeros(std::size_t channels) {
    if (channels == 0) throw ShapeError("EmbedParams: channels must be positive");
    EmbedParams p;
    p.channels = channels;
    p.hidden = std::max<std::size_t>(1, channels / 2);
    p.reduce_weight = Tensor(Shape{p.hidden, channels});
    p.reduce_bias = Tensor(Shape{p.hidden});
    p.depthwise_weight = Tensor(Shape{p.hidden, 9});
    p.depthwise_bias = Tensor(Shape{p.hidden});
    p.expand_weight = Tensor(Shape{channels, p.hidden});
    p.expand_bias = Tensor(Shape{channels});
    return p;
}

EmbedParams EmbedParams::seeded(std::size_t channels, std::uint64_t seed) {
    EmbedParams p = zeros(channels);
    p.seed = seed;
    Rng rng(seed);
    for (Tensor* t : {&p.reduce_weight, &p.reduce_bias, &p.depthwise_weight, &p.depthwise_bias,
                      &p.expand_weight, &p.expand_bias}) {
        for (auto& v : t->values()) v = static_cast<float>(rng.uniform(-0.1, 0.1));
    }
    return p;
}

Tensor drb_embed(const Tensor& tokens, const EmbedParams& params, GridShape grid) {
    require_rank(tokens, 2, "drb_embed");
    const std::size_t L = tokens.dim(0), C = tokens.dim(1), H = grid.height, W = grid.width;
    if (C != params.channels) {
        throw ShapeError("drb_embed: tokens have " + std::to_string(C) + " channels, params expect " +
                         std::to_string(params.channels));
    }
    if (H * W != L) {
        throw ShapeError("drb_embed: grid " + std::to_string(H) + "x" + std::to_string(W) +
                         " does not cover " + std::to_string(L) + " tokens");
    }
    const std::size_t Ch = params.hidden;

    // reduce: L×Ch
    Tensor reduced(Shape{L, Ch});
    for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t h = 0; h < Ch; ++h) {
            float acc = params.reduce_bias[h];
            for (std::size_t c = 0; c < C; ++c) acc += params.reduce_weight(h, c) * tokens(l, c);
            reduced(l, h) = acc;
        }
    }

    // depthwise 3×3, zero padding, then leaky ReLU
    Tensor mixed(Shape{L, Ch});
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            const std::size_t l = y * W + x;
            for (std::size_t h = 0; h < Ch; ++h) {
                float acc = params.depthwise_bias[h];
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const auto sy = static_cast<std::ptrdiff_t>(y) + dy;
                        const auto sx = static_cast<std::ptrdiff_t>(x) + dx;
                        if (sy < 0 || sx < 0 || sy >= static_cast<std::ptrdiff_t>(H) ||
                            sx >= static_cast<std::ptrdiff_t>(W))
                            continue;
                        acc += params.depthwise_weight(h, static_cast<std::size_t>((dy + 1) * 3 + dx + 1)) *
                               reduced(static_cast<std::size_t>(sy) * W + static_cast<std::size_t>(sx), h);
                    }
                }
                mixed(l, h) = acc > 0.0f ? acc : 0.01f * acc;
            }
        }
    }

    // expand and add residually
    Tensor out = tokens;
    for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t c = 0; c < C; ++c) {
            float acc = params.expand_bias[c];
            for (std::size_t h = 0; h < Ch; ++h) acc += params.expand_weight(c, h) * mixed(l, h);
            out(l, c) += acc;
        }
    }
    return out;
}

Tensor drb_embed(const Tensor& tokens, const EmbedParams& params) {
    require_rank(tokens, 2, "drb_embed");
    return drb_embed(tokens, params, GridShape{1, tokens.dim(0)});
}

template <class T>
BasicTensor<T> map_to_tokens(const BasicTensor<T>& map) {
    require_rank(map, 3, "map_to_tokens");
    const std::size_t C = map.dim(0), L = map.dim(1) * map.dim(2);
    BasicTensor<T> tokens(Shape{L, C});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t l = 0; l < L; ++l) tokens(l, c) = map[c * L + l];
    return tokens;
}

template <class T>
BasicTensor<T> tokens_to_map(const BasicTensor<T>& tokens, std::size_t height, std::size_t width) {
    require_rank(tokens, 2, "tokens_to_map");
    const std::size_t L = tokens.dim(0), C = tokens.dim(1);
    if (height * width != L) {
        throw ShapeError("tokens_to_map: " + std::to_string(L) + " tokens do not fill " +
                         std::to_string(height) + "x" + std::to_string(width));
    }
    BasicTensor<T> map(Shape{C, height, width});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t l = 0; l < L; ++l) map[c * L + l] = tokens(l, c);
    return map;
}

Tensor global_context(const Tensor& middle, const Tensor& propagated, const EmbedParams& params) {
    require_rank(middle, 3, "global_context middle");
    if (middle.dims() != propagated.dims()) {
        throw ShapeError("global_context: middle " + shape_string(middle.dims()) +
                         " and propagated " + shape_string(propagated.dims()) + " differ");
    }
    const GridShape grid{middle.dim(1), middle.dim(2)};
    AttentionInputs inp(drb_embed(map_to_tokens(middle), params, grid),
                        drb_embed(map_to_tokens(propagated), params, grid));
    return tokens_to_map(efficient_cross_attention(inp), grid.height, grid.width);
}

#define LGMC_INSTANTIATE(T)                                                                        \
    template struct BasicAttentionInputs<T>;                                                       \
    template VanillaAttention<T> vanilla_cross_attention(const BasicAttentionInputs<T>&);          \
    template BasicTensor<T> efficient_cross_attention(const BasicAttentionInputs<T>&);             \
    template BasicTensor<T> materialize_efficient_similarity(const BasicAttentionInputs<T>&,       \
                                                             std::size_t);                         \
    template AttentionGrad<T> efficient_attention_backward(const BasicAttentionInputs<T>&,         \
                                                           const BasicTensor<T>&);                 \
    template BasicTensor<T> map_to_tokens(const BasicTensor<T>&);                                  \
    template BasicTensor<T> tokens_to_map(const BasicTensor<T>&, std::size_t, std::size_t);

LGMC_INSTANTIATE(float)
LGMC_INSTANTIATE(double)

#undef LGMC_INSTANTIATE

}  // namespace lgmc
