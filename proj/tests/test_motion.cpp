#include <doctest.h>

#include <cmath>
#include <numbers>

#include "lgmc/gradcheck.hpp"
#include "lgmc/image_io.hpp"
#include "lgmc/motion.hpp"
#include "lgmc/rng.hpp"

using namespace lgmc;

namespace {

Tensor ramp(std::size_t h, std::size_t w) {
    Tensor t(Shape{1, h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) t(0, y, x) = static_cast<float>(x);
    return t;
}

FlowField random_flow(Rng& rng, std::size_t w, std::size_t h, double mag) {
    FlowField f(w, h);
    for (auto& v : f.values()) v = static_cast<float>(rng.uniform(-mag, mag));
    return f;
}

// Smooth but non-periodic texture so every interior block has a unique SAD minimum.
Tensor texture(std::size_t h, std::size_t w, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t(Shape{1, h, w});
    for (auto& v : t.values()) v = static_cast<float>(rng.uniform());
    return t;
}

}  // namespace

TEST_SUITE("motion") {

TEST_CASE("flow field invariants") {
    FlowField f(3, 2, 1.5f, -2.0f);
    CHECK(f.u(2, 1) == 1.5f);
    CHECK(f.v(0, 0) == -2.0f);
    CHECK_NOTHROW(f.validate());
    f.u(1, 1) = 600.0f;
    CHECK_THROWS_AS(f.validate(), DomainError);
    CHECK_NOTHROW(f.validate(1000.0));
    f.u(1, 1) = std::nanf("");
    CHECK_THROWS_AS(f.validate(1e9), DomainError);
    CHECK_THROWS(FlowField(0, 3));
}

TEST_CASE("bilinear_warp") {
    SUBCASE("zero flow is a bit-exact identity") {
        Rng rng(1);
        for (int trial = 0; trial < 10; ++trial) {
            const auto feat = random_tensor<Tensor>(rng, -10, 10, {3, 7, 5});
            CHECK(bilinear_warp(feat, FlowField(5, 7)) == feat);
        }
    }
    SUBCASE("integer shift on a ramp clamps at the border") {
        const auto out = bilinear_warp(ramp(4, 6), FlowField(6, 4, 1.0f, 0.0f));
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t x = 0; x < 6; ++x) CHECK(out(0, y, x) == std::min<float>(x + 1, 5));
    }
    SUBCASE("half-pixel shift interpolates linearly") {
        const auto out = bilinear_warp(ramp(3, 8), FlowField(8, 3, 0.5f, 0.0f));
        for (std::size_t y = 0; y < 3; ++y)
            for (std::size_t x = 0; x + 1 < 8; ++x) CHECK(out(0, y, x) == doctest::Approx(x + 0.5));
    }
    SUBCASE("linear in the feature") {
        Rng rng(2);
        const auto a = random_tensor<Tensor>(rng, -1, 1, {2, 6, 6});
        const auto b = random_tensor<Tensor>(rng, -1, 1, {2, 6, 6});
        const auto flow = random_flow(rng, 6, 6, 4.0);
        const float alpha = 0.7f, beta = -1.3f;
        const auto lhs = bilinear_warp(add(scale(a, alpha), scale(b, beta)), flow);
        const auto rhs = add(scale(bilinear_warp(a, flow), alpha), scale(bilinear_warp(b, flow), beta));
        for (std::size_t i = 0; i < lhs.size(); ++i) CHECK(std::abs(lhs[i] - rhs[i]) <= 1e-6f);
    }
    SUBCASE("constant field is a fixed point") {
        Rng rng(3);
        const Tensor feat(Shape{2, 5, 9}, 0.625f);
        const auto out = bilinear_warp(feat, random_flow(rng, 9, 5, 30.0));
        for (float v : out.values()) CHECK(std::abs(v - 0.625f) <= 1e-6f);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(bilinear_warp(Tensor(Shape{1, 4, 4}), FlowField(4, 5)), ShapeError);
        CHECK_THROWS_AS(bilinear_warp(Tensor(Shape{4, 4}), FlowField(4, 4)), ShapeError);
        CHECK_THROWS_AS(bilinear_warp(Tensor(Shape{1, 4, 4}), FlowField(4, 4, 1000.0f, 0.0f)), DomainError);
    }
}

TEST_CASE("bilinear_warp_backward") {
    Rng rng(11);
    SUBCASE("zero upstream gradient") {
        const auto feat = random_tensor<Tensor64>(rng, -1, 1, {1, 5, 5});
        const auto g = bilinear_warp_backward(feat, FlowField64(5, 5, 0.3, -0.2), Tensor64(Shape{1, 5, 5}));
        CHECK(g.d_feature == Tensor64(Shape{1, 5, 5}));
        CHECK(g.d_flow == FlowField64(5, 5));
    }
    SUBCASE("fractional offsets match finite differences") {
        const auto feat = random_tensor<Tensor64>(rng, -1, 1, {1, 5, 5});
        const auto weights = random_tensor<Tensor64>(rng, -1, 1, {1, 5, 5});
        const FlowField64 flow(5, 5, 0.3, 0.3);
        auto loss = [&](const Tensor64& f, const FlowField64& fl) {
            const auto out = bilinear_warp(f, fl);
            double s = 0;
            for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * weights[i];
            return s;
        };
        const auto g = bilinear_warp_backward(feat, flow, weights);
        const auto fd_feat = finite_difference_gradient([&](const Tensor64& t) { return loss(t, flow); }, feat, 1e-6);
        const Tensor64 flow_t(Shape{50}, flow.values());
        const auto fd_flow = finite_difference_gradient(
            [&](const Tensor64& t) {
                FlowField64 fl(5, 5);
                std::copy(t.values().begin(), t.values().end(), fl.values().begin());
                return loss(feat, fl);
            },
            flow_t, 1e-6);
        CHECK(max_relative_error(g.d_feature.values(), fd_feat.values(), kGradMagnitudeFloor) <= 1e-4);
        // Interior pixels only: the last row/column samples past the border and is clamped.
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t x = 0; x < 4; ++x) {
                const std::size_t i = 2 * (y * 5 + x);
                CHECK(std::abs(g.d_flow.values()[i] - fd_flow[i]) <= 1e-4 * std::max(1e-4, std::abs(fd_flow[i])));
                CHECK(std::abs(g.d_flow.values()[i + 1] - fd_flow[i + 1]) <=
                      1e-4 * std::max(1e-4, std::abs(fd_flow[i + 1])));
            }
    }
    SUBCASE("flat field has zero flow gradient") {
        const auto g = bilinear_warp_backward(Tensor64(Shape{2, 4, 4}, 3.0), FlowField64(4, 4),
                                              random_tensor<Tensor64>(rng, -1, 1, {2, 4, 4}));
        for (double v : g.d_flow.values()) CHECK(v == 0.0);
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(bilinear_warp_backward(Tensor64(Shape{1, 4, 4}), FlowField64(4, 4), Tensor64(Shape{1, 4, 5})),
                        ShapeError);
    }
}

TEST_CASE("build_pyramid") {
    const PyramidConfig cfg;
    SUBCASE("shapes") {
        const auto p = build_pyramid(Tensor(Shape{3, 8, 8}, 0.5f), cfg);
        CHECK(p.levels[0].dims() == Shape{32, 8, 8});
        CHECK(p.levels[1].dims() == Shape{48, 4, 4});
        CHECK(p.levels[2].dims() == Shape{64, 2, 2});
    }
    SUBCASE("odd extents round up") {
        const auto p = build_pyramid(Tensor(Shape{3, 9, 9}, 0.5f), cfg);
        CHECK(p.levels[1].dims() == Shape{48, 5, 5});
        CHECK(p.levels[2].dims() == Shape{64, 3, 3});
    }
    SUBCASE("constant input gives spatially constant levels") {
        const auto p = build_pyramid(Tensor(Shape{3, 9, 7}, 0.25f), cfg);
        for (const auto& level : p.levels)
            for (std::size_t c = 0; c < level.dim(0); ++c)
                for (std::size_t y = 0; y < level.dim(1); ++y)
                    for (std::size_t x = 0; x < level.dim(2); ++x)
                        CHECK(std::abs(level(c, y, x) - level(c, 0, 0)) <= 1e-6f);
    }
    SUBCASE("deterministic for a fixed seed") {
        Rng rng(4);
        const auto in = random_tensor<Tensor>(rng, 0, 1, {3, 8, 8});
        CHECK(build_pyramid(in, cfg).levels[2] == build_pyramid(in, cfg).levels[2]);
    }
    SUBCASE("too small") {
        CHECK_THROWS_AS(build_pyramid(Tensor(Shape{3, 3, 8}), cfg), ShapeError);
    }
}

TEST_CASE("downsample_flow") {
    const auto half = downsample_flow(FlowField(8, 6, 4.0f, 2.0f), 2);
    CHECK(half == FlowField(4, 3, 2.0f, 1.0f));
    CHECK(downsample_flow(FlowField(5, 5), 4) == FlowField(2, 2));

    Rng rng(6);
    const auto f = random_flow(rng, 16, 12, 8.0);
    const auto direct = downsample_flow(f, 4);
    const auto twice = downsample_flow(downsample_flow(f, 2), 2);
    REQUIRE(direct.width() == twice.width());
    for (std::size_t i = 0; i < direct.values().size(); ++i)
        CHECK(std::abs(direct.values()[i] - twice.values()[i]) <= 1e-6f);
    CHECK_THROWS(downsample_flow(f, 3));
}

TEST_CASE("local_contexts") {
    Rng rng(8);
    const auto pyr = build_pyramid(random_tensor<Tensor>(rng, 0, 1, {3, 16, 16}), PyramidConfig{});
    SUBCASE("zero flow returns the levels") {
        const auto l = local_contexts(pyr, FlowField(16, 16));
        for (int s = 0; s < 3; ++s) CHECK(l[s] == pyr.levels[s]);
    }
    SUBCASE("integer shift moves every level by its scaled shift") {
        const auto l = local_contexts(pyr, FlowField(16, 16, 4.0f, 0.0f));
        for (std::size_t s = 0; s < 3; ++s) {
            const std::size_t shift = 4u >> s;
            const auto& lv = pyr.levels[s];
            CHECK(l[s].dims() == lv.dims());
            const std::size_t w = lv.dim(2);
            for (std::size_t c = 0; c < lv.dim(0); c += 7)
                for (std::size_t y = 0; y < lv.dim(1); ++y)
                    for (std::size_t x = 0; x < w; ++x)
                        CHECK(l[s](c, y, x) == doctest::Approx(lv(c, y, std::min(x + shift, w - 1))).epsilon(1e-6));
        }
    }
}

TEST_CASE("synth_flow") {
    CHECK(synth_flow(SynthKind::translation, {}, 4, 3) == FlowField(4, 3));
    CHECK(synth_flow(SynthKind::translation, {.tx = 1.5, .ty = -2}, 4, 3) == FlowField(4, 3, 1.5f, -2.0f));
    CHECK(synth_flow(SynthKind::zoom, {.zoom = 1.0}, 5, 5) == FlowField(5, 5));

    const auto rot = synth_flow(SynthKind::rotation, {.theta = std::numbers::pi / 2}, 3, 3);
    CHECK(rot.u(0, 0) == doctest::Approx(2.0));
    CHECK(rot.v(0, 0) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(std::abs(rot.u(1, 1)) <= 1e-6f);
    CHECK(std::abs(rot.v(1, 1)) <= 1e-6f);

    const auto zoom = synth_flow(SynthKind::zoom, {.zoom = 2.0}, 5, 3);
    CHECK(zoom.u(4, 1) == doctest::Approx(2.0));
    CHECK(zoom.v(0, 0) == doctest::Approx(-1.0));
    CHECK_THROWS(synth_flow(SynthKind::zoom, {.zoom = std::nan("")}, 5, 3));
}

TEST_CASE("block_match") {
    const auto ref = texture(32, 32, 21);
    SUBCASE("identical frames give zero flow") {
        CHECK(block_match(ref, ref, 8, 4) == FlowField(32, 32));
    }
    SUBCASE("flat frames give zero flow through the tie-break") {
        const Tensor flat(Shape{1, 16, 16}, 0.5f);
        CHECK(block_match(flat, flat, 4, 3) == FlowField(16, 16));
    }
    SUBCASE("a constructed shift is recovered on interior blocks") {
        for (int sx : {3, -2})
            for (int sy : {0, 1}) {
                Tensor cur(Shape{1, 32, 32});
                for (int y = 0; y < 32; ++y)
                    for (int x = 0; x < 32; ++x)
                        cur(0, y, x) = ref(0, std::clamp(y + sy, 0, 31), std::clamp(x + sx, 0, 31));
                const auto flow = block_match(ref, cur, 8, 4);
                for (std::size_t y = 8; y < 24; ++y)
                    for (std::size_t x = 8; x < 24; ++x) {
                        CHECK(flow.u(x, y) == static_cast<float>(sx));
                        CHECK(flow.v(x, y) == static_cast<float>(sy));
                    }
            }
    }
    SUBCASE("degenerate arguments") {
        CHECK_THROWS(block_match(ref, ref, 2, 4));
        CHECK_THROWS(block_match(ref, ref, 8, 0));
        CHECK_THROWS(block_match(ref, texture(16, 32, 1), 8, 2));
        CHECK_THROWS(block_match(Tensor(Shape{3, 32, 32}), Tensor(Shape{3, 32, 32}), 8, 2));
    }
}

TEST_CASE("flow file format") {
    Rng rng(12);
    const auto f = random_flow(rng, 7, 3, 50.0);
    const auto bytes = encode_flow(f);
    CHECK(bytes.size() == 12 + 7 * 3 * 8);
    CHECK(decode_flow(bytes) == f);
    // "PIEH" is 202021.25f little-endian, then width 7
    CHECK(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 8) ==
          std::vector<std::uint8_t>{0x50, 0x49, 0x45, 0x48, 0x07, 0x00, 0x00, 0x00});

    auto bad = bytes;
    bad[0] ^= 1;
    CHECK_THROWS_AS(decode_flow(bad), FormatError);
    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(decode_flow(truncated), FormatError);
    auto zero_w = bytes;
    zero_w[4] = 0;
    CHECK_THROWS_AS(decode_flow(zero_w), FormatError);
}

TEST_CASE("pnm images") {
    const std::string p5 = "P5\n2 1\n255\n";
    std::vector<std::uint8_t> bytes(p5.begin(), p5.end());
    bytes.push_back(0);
    bytes.push_back(255);
    const auto img = decode_pnm(bytes);
    CHECK(img == Tensor(Shape{1, 1, 2}, {0.0f, 1.0f}));
    CHECK(encode_pnm(img) == bytes);

    Rng rng(5);
    Tensor color(Shape{3, 4, 5});
    for (auto& v : color.values()) v = static_cast<float>(rng.next() % 256) / 255.0f;
    CHECK(decode_pnm(encode_pnm(color)) == color);

    CHECK_THROWS_AS(decode_pnm(std::vector<std::uint8_t>{'P', '3'}), FormatError);
    bytes.pop_back();
    CHECK_THROWS_AS(decode_pnm(bytes), FormatError);

    const auto padded = pad_to_multiple(color, 8);
    CHECK(padded.dims() == Shape{3, 8, 8});
    CHECK(padded(1, 7, 7) == color(1, 3, 4));
    CHECK(crop(padded, 4, 5) == color);
}

}  // TEST_SUITE
