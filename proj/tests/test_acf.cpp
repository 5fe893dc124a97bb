#include <doctest.h>

#include <algorithm>
#include <random>

#include "acfseg/acf.hpp"
#include "acfseg/ops.hpp"
#include "oracles.hpp"

using namespace acfseg;

namespace {

// The 2x2 toy feature map with pixels p0=(1,0), p1=(3,0), p2=(0,2), p3=(0,4).
NodePtr toy_feature() {
    Tensor f({1, 2, 2, 2});
    f.at4(0, 0, 0, 0) = 1.0f;
    f.at4(0, 0, 0, 1) = 3.0f;
    f.at4(0, 1, 1, 0) = 2.0f;
    f.at4(0, 1, 1, 1) = 4.0f;
    return constant(f);
}

Tensor normalized_probs(const Shape& bnhw, std::mt19937_64& rng) {
    Tensor p = oracles::random_tensor(bnhw, rng, 0.01f, 1.0f);
    const int B = bnhw[0], N = bnhw[1], H = bnhw[2], W = bnhw[3];
    for (int n = 0; n < B; ++n)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                float z = 0.0f;
                for (int i = 0; i < N; ++i) z += p.at4(n, i, h, w);
                for (int i = 0; i < N; ++i) p.at4(n, i, h, w) /= z;
            }
    return p;
}

}  // namespace

TEST_CASE("class_center one-hot case equals per-class means") {
    Tensor probs({1, 2, 2, 2});
    probs.at4(0, 0, 0, 0) = 1.0f;  // class 0 = {p0, p1}
    probs.at4(0, 0, 0, 1) = 1.0f;
    probs.at4(0, 1, 1, 0) = 1.0f;  // class 1 = {p2, p3}
    probs.at4(0, 1, 1, 1) = 1.0f;
    auto centers = class_center(toy_feature(), constant(probs));
    REQUIRE(centers->value.shape == Shape{1, 2, 2});
    CHECK(centers->value[0] == doctest::Approx(2.0f).epsilon(1e-5));  // center 0 = (2, 0)
    CHECK(centers->value[1] == doctest::Approx(0.0f).epsilon(1e-5));
    CHECK(centers->value[2] == doctest::Approx(0.0f).epsilon(1e-5));  // center 1 = (0, 3)
    CHECK(centers->value[3] == doctest::Approx(3.0f).epsilon(1e-5));
}

TEST_CASE("class_center uniform probs give the global mean feature") {
    Tensor probs({1, 2, 2, 2}, 0.5f);
    auto centers = class_center(toy_feature(), constant(probs));
    // global mean = ((1+3)/4, (2+4)/4) = (1, 1.5)
    for (int i = 0; i < 2; ++i) {
        CHECK(centers->value[size_t(i * 2 + 0)] == doctest::Approx(1.0f).epsilon(1e-5));
        CHECK(centers->value[size_t(i * 2 + 1)] == doctest::Approx(1.5f).epsilon(1e-5));
    }
}

TEST_CASE("class_center soft-probs case") {
    Tensor probs({1, 2, 2, 2});
    probs.at4(0, 0, 0, 0) = 0.5f;  // p0 = (0.5, 0.5)
    probs.at4(0, 1, 0, 0) = 0.5f;
    probs.at4(0, 0, 0, 1) = 1.0f;  // p1 = (1, 0)
    probs.at4(0, 1, 1, 0) = 1.0f;  // p2 = (0, 1)
    probs.at4(0, 1, 1, 1) = 1.0f;  // p3 = (0, 1)
    auto centers = class_center(toy_feature(), constant(probs));
    CHECK(centers->value[0] == doctest::Approx(7.0f / 3.0f).epsilon(1e-5));
    CHECK(centers->value[1] == doctest::Approx(0.0f).epsilon(1e-5));
    CHECK(centers->value[2] == doctest::Approx(0.2f).epsilon(1e-5));
    CHECK(centers->value[3] == doctest::Approx(2.4f).epsilon(1e-5));
}

TEST_CASE("class_center with an absent class yields a zero center") {
    Tensor probs({1, 2, 2, 2});
    probs.at4(0, 0, 0, 0) = 1.0f;
    probs.at4(0, 0, 0, 1) = 1.0f;
    probs.at4(0, 0, 1, 0) = 1.0f;
    probs.at4(0, 0, 1, 1) = 1.0f;  // class 1 gets zero probability everywhere
    auto centers = class_center(toy_feature(), constant(probs));
    CHECK(centers->value[2] == doctest::Approx(0.0f));
    CHECK(centers->value[3] == doctest::Approx(0.0f));
}

TEST_CASE("class_attention_sum frozen cases") {
    Tensor centers({1, 2, 2}, std::vector<float>{2, 0, 0, 3});
    Tensor probs({1, 2, 1, 2});
    probs.at4(0, 0, 0, 0) = 1.0f;  // pixel 0: one-hot class 0
    probs.at4(0, 0, 0, 1) = 0.5f;  // pixel 1: (0.5, 0.5)
    probs.at4(0, 1, 0, 1) = 0.5f;
    auto out = class_attention_sum(constant(centers), constant(probs));
    REQUIRE(out->value.shape == Shape{1, 2, 1, 2});
    CHECK(out->value.at4(0, 0, 0, 0) == doctest::Approx(2.0f));
    CHECK(out->value.at4(0, 1, 0, 0) == doctest::Approx(0.0f));
    CHECK(out->value.at4(0, 0, 0, 1) == doctest::Approx(1.0f));
    CHECK(out->value.at4(0, 1, 0, 1) == doctest::Approx(1.5f));
}

TEST_CASE("class_attention_concat frozen cases") {
    Tensor centers({1, 2, 2}, std::vector<float>{2, 0, 0, 3});
    Tensor probs({1, 2, 1, 2});
    probs.at4(0, 0, 0, 0) = 1.0f;
    probs.at4(0, 0, 0, 1) = 0.5f;
    probs.at4(0, 1, 0, 1) = 0.5f;
    auto out = class_attention_concat(constant(centers), constant(probs));
    REQUIRE(out->value.shape == Shape{1, 4, 1, 2});
    const float want0[4] = {2, 0, 0, 0};
    const float want1[4] = {1, 0, 0, 1.5f};
    for (int c = 0; c < 4; ++c) {
        CHECK(out->value.at4(0, c, 0, 0) == doctest::Approx(want0[c]));
        CHECK(out->value.at4(0, c, 0, 1) == doctest::Approx(want1[c]));
    }
}

TEST_CASE("matrix-loop equivalence on random instances") {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> bd(1, 2), nd(2, 5), cd(1, 8), sd(1, 6);
    for (int trial = 0; trial < 120; ++trial) {
        const int B = bd(rng), N = nd(rng), C = cd(rng), H = sd(rng), W = sd(rng);
        auto feature = oracles::random_tensor({B, C, H, W}, rng);
        auto probs = normalized_probs({B, N, H, W}, rng);

        auto centers = class_center(constant(feature), constant(probs));
        CHECK(oracles::max_abs_diff(centers->value,
                                    oracles::class_center_ref(feature, probs)) < 1e-5f);

        auto cvals = oracles::random_tensor({B, N, C}, rng);
        auto asum = class_attention_sum(constant(cvals), constant(probs));
        CHECK(oracles::max_abs_diff(asum->value, oracles::attention_sum_ref(cvals, probs)) < 1e-5f);

        auto acat = class_attention_concat(constant(cvals), constant(probs));
        CHECK(oracles::max_abs_diff(acat->value, oracles::attention_concat_ref(cvals, probs)) <
              1e-5f);
    }
}

TEST_CASE("convexity of centers and sum-variant features") {
    std::mt19937_64 rng(55);
    const int B = 2, N = 3, C = 4, H = 5, W = 5;
    auto feature = oracles::random_tensor({B, C, H, W}, rng);
    auto probs = normalized_probs({B, N, H, W}, rng);
    auto centers = class_center(constant(feature), constant(probs));

    for (int n = 0; n < B; ++n)
        for (int c = 0; c < C; ++c) {
            float lo = 1e30f, hi = -1e30f;
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    lo = std::min(lo, feature.at4(n, c, h, w));
                    hi = std::max(hi, feature.at4(n, c, h, w));
                }
            for (int i = 0; i < N; ++i) {
                const float v = centers->value[size_t((int64_t(n) * N + i) * C + c)];
                CHECK(v >= lo - 1e-5f);
                CHECK(v <= hi + 1e-5f);
            }
        }

    auto asum = class_attention_sum(centers, constant(probs));
    for (int n = 0; n < B; ++n)
        for (int c = 0; c < C; ++c) {
            float lo = 1e30f, hi = -1e30f;
            for (int i = 0; i < N; ++i) {
                const float v = centers->value[size_t((int64_t(n) * N + i) * C + c)];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    CHECK(asum->value.at4(n, c, h, w) >= lo - 1e-5f);
                    CHECK(asum->value.at4(n, c, h, w) <= hi + 1e-5f);
                }
        }
}

TEST_CASE("permutation equivariance over the class axis") {
    std::mt19937_64 rng(77);
    const int B = 1, N = 4, C = 3, H = 4, W = 4;
    auto feature = oracles::random_tensor({B, C, H, W}, rng);
    auto probs = normalized_probs({B, N, H, W}, rng);
    const int perm[4] = {2, 0, 3, 1};

    Tensor probs_p({B, N, H, W});
    for (int i = 0; i < N; ++i)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) probs_p.at4(0, i, h, w) = probs.at4(0, perm[i], h, w);

    auto centers = class_center(constant(feature), constant(probs));
    auto centers_p = class_center(constant(feature), constant(probs_p));
    for (int i = 0; i < N; ++i)
        for (int c = 0; c < C; ++c)
            CHECK(centers_p->value[size_t(i * C + c)] ==
                  doctest::Approx(centers->value[size_t(perm[i] * C + c)]).epsilon(1e-5));

    auto asum = class_attention_sum(centers, constant(probs));
    auto asum_p = class_attention_sum(centers_p, constant(probs_p));
    CHECK(oracles::max_abs_diff(asum->value, asum_p->value) < 1e-5f);
}

TEST_CASE("broadcast_centers tiles per-image center matrices") {
    Tensor centers({1, 2, 2}, std::vector<float>{2, 0, 0, 3});
    auto out = broadcast_centers(constant(centers), 2, 3);
    REQUIRE(out->value.shape == Shape{1, 4, 2, 3});
    for (int h = 0; h < 2; ++h)
        for (int w = 0; w < 3; ++w) {
            CHECK(out->value.at4(0, 0, h, w) == doctest::Approx(2.0f));
            CHECK(out->value.at4(0, 1, h, w) == doctest::Approx(0.0f));
            CHECK(out->value.at4(0, 3, h, w) == doctest::Approx(3.0f));
        }
}

TEST_CASE("acf module output shapes per variant") {
    std::mt19937_64 rng(91);
    const int B = 1, C = 8, Cr = 4, N = 3, H = 4, W = 4;
    auto feature = constant(oracles::random_tensor({B, C, H, W}, rng));
    auto probs = constant(normalized_probs({B, N, H, W}, rng));
    for (auto variant : {AcfVariant::Sum, AcfVariant::Concat, AcfVariant::CenterOnly}) {
        ParamRegistry reg;
        AcfModule acf(reg, "acf", C, Cr, N, variant, rng);
        auto out = acf.forward(feature, probs, /*train=*/true);
        CHECK(out->value.shape == Shape{B, Cr, H, W});
        CHECK(out->value.all_finite());
    }
}
