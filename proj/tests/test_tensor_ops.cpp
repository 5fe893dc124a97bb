#include <doctest.h>

#include <cmath>
#include <random>

#include "acfseg/ops.hpp"
#include "oracles.hpp"

using namespace acfseg;

TEST_CASE("conv2d counting-overlap case") {
    auto x = constant(Tensor({1, 1, 3, 3}, 1.0f));
    auto w = constant(Tensor({1, 1, 3, 3}, 1.0f));
    auto b = constant(Tensor({1}));
    auto y = conv2d(x, w, b, 1, 1, 1);
    CHECK(y->value.shape == Shape{1, 1, 3, 3});
    CHECK(y->value.at4(0, 0, 1, 1) == doctest::Approx(9.0f));
    CHECK(y->value.at4(0, 0, 0, 0) == doctest::Approx(4.0f));
    CHECK(y->value.at4(0, 0, 2, 2) == doctest::Approx(4.0f));
}

TEST_CASE("conv2d 1x1 scaling case") {
    std::mt19937_64 rng(7);
    auto x = constant(oracles::random_tensor({2, 1, 4, 4}, rng));
    auto w = constant(Tensor({1, 1, 1, 1}, 2.0f));
    auto b = constant(Tensor({1}));
    auto y = conv2d(x, w, b, 1, 0, 1);
    for (size_t i = 0; i < x->value.data.size(); ++i)
        CHECK(y->value.data[i] == doctest::Approx(2.0f * x->value.data[i]));
}

TEST_CASE("conv2d matches loop reference across configs") {
    std::mt19937_64 rng(11);
    struct Cfg {
        int cin, cout, h, w, k, stride, padding, dilation;
    };
    const Cfg cfgs[] = {
        {4, 3, 8, 8, 3, 1, 2, 2},  // the dilated case
        {3, 5, 7, 9, 3, 2, 1, 1},  // strided downsampling
        {6, 2, 5, 5, 1, 1, 0, 1},  // pointwise
    };
    for (const auto& c : cfgs) {
        auto x = oracles::random_tensor({2, c.cin, c.h, c.w}, rng);
        auto w = oracles::random_tensor({c.cout, c.cin, c.k, c.k}, rng);
        auto b = oracles::random_tensor({c.cout}, rng);
        auto got = conv2d(constant(x), constant(w), constant(b), c.stride, c.padding, c.dilation);
        auto want = oracles::conv2d_ref(x, w, b, c.stride, c.padding, c.dilation);
        REQUIRE(got->value.shape == want.shape);
        CHECK(oracles::max_abs_diff(got->value, want) < 1e-4f);
    }
}

TEST_CASE("conv2d rejects channel mismatch") {
    auto x = constant(Tensor({1, 3, 4, 4}, 0.5f));
    auto w = constant(Tensor({2, 4, 3, 3}, 0.5f));
    auto b = constant(Tensor({2}));
    CHECK_THROWS_AS(conv2d(x, w, b, 1, 1, 1), std::invalid_argument);
}

TEST_CASE("matmul identity and loop reference") {
    Tensor eye({3, 3});
    for (int i = 0; i < 3; ++i) eye.at2(i, i) = 1.0f;
    std::mt19937_64 rng(3);
    auto a = oracles::random_tensor({3, 4}, rng);
    auto y = matmul(constant(eye), constant(a));
    CHECK(oracles::max_abs_diff(y->value, a) == 0.0f);

    auto p = oracles::random_tensor({5, 7}, rng);
    auto q = oracles::random_tensor({7, 6}, rng);
    auto got = matmul(constant(p), constant(q));
    CHECK(oracles::max_abs_diff(got->value, oracles::matmul_ref(p, q)) < 1e-4f);
}

TEST_CASE("softmax symmetry, normalization and positivity") {
    auto y = softmax(constant(Tensor({1, 3}, 0.0f)), 1);
    for (float v : y->value.data) CHECK(v == doctest::Approx(1.0f / 3.0f));

    std::mt19937_64 rng(5);
    auto x = oracles::random_tensor({4, 6}, rng, -3.0f, 3.0f);
    auto s = softmax(constant(x), 1);
    for (int r = 0; r < 4; ++r) {
        double sum = 0.0;
        for (int c = 0; c < 6; ++c) {
            CHECK(s->value.at2(r, c) > 0.0f);
            CHECK(s->value.at2(r, c) < 1.0f);
            sum += s->value.at2(r, c);
        }
        CHECK(std::fabs(sum - 1.0) < 1e-6);
    }
}

TEST_CASE("bilinear upsample anchors corners and is identity at same size") {
    Tensor x({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
    auto y = upsample_bilinear(constant(x), 4, 4);
    CHECK(y->value.at4(0, 0, 0, 0) == doctest::Approx(1.0f));
    CHECK(y->value.at4(0, 0, 0, 3) == doctest::Approx(2.0f));
    CHECK(y->value.at4(0, 0, 3, 0) == doctest::Approx(3.0f));
    CHECK(y->value.at4(0, 0, 3, 3) == doctest::Approx(4.0f));

    std::mt19937_64 rng(9);
    auto z = oracles::random_tensor({1, 2, 5, 7}, rng);
    auto same = upsample_bilinear(constant(z), 5, 7);
    CHECK(oracles::max_abs_diff(same->value, z) == 0.0f);
}

TEST_CASE("reshape round-trip is identity") {
    std::mt19937_64 rng(13);
    auto x = oracles::random_tensor({2, 3, 4}, rng);
    auto y = reshape(reshape(constant(x), {6, 4}), {2, 3, 4});
    CHECK(oracles::max_abs_diff(y->value, x) == 0.0f);
}

TEST_CASE("transpose and concat basics") {
    Tensor x({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
    auto t = transpose(constant(x), {1, 0});
    CHECK(t->value.shape == Shape{3, 2});
    CHECK(t->value.at2(0, 1) == doctest::Approx(4.0f));
    CHECK(t->value.at2(2, 0) == doctest::Approx(3.0f));

    auto a = constant(Tensor({1, 2, 2, 2}, 1.0f));
    auto b = constant(Tensor({1, 3, 2, 2}, 2.0f));
    auto c = concat({a, b}, 1);
    CHECK(c->value.shape == Shape{1, 5, 2, 2});
    CHECK(c->value.at4(0, 1, 0, 0) == doctest::Approx(1.0f));
    CHECK(c->value.at4(0, 2, 0, 0) == doctest::Approx(2.0f));
}

TEST_CASE("batchnorm constant input and affine degenerate cases") {
    auto x = constant(Tensor({2, 2, 3, 3}, 4.0f));
    BatchNormStats stats{Tensor({2}), Tensor({2}, 1.0f)};

    auto gamma1 = constant(Tensor({2}, 1.0f));
    auto beta0 = constant(Tensor({2}));
    auto y = batchnorm2d(x, gamma1, beta0, stats, /*train=*/true);
    for (float v : y->value.data) CHECK(std::fabs(v) < 1e-4f);

    auto gamma0 = constant(Tensor({2}));
    auto beta5 = constant(Tensor({2}, 5.0f));
    auto z = batchnorm2d(x, gamma0, beta5, stats, /*train=*/true);
    for (float v : z->value.data) CHECK(v == doctest::Approx(5.0f));
}

TEST_CASE("batchnorm train mode normalizes per channel") {
    std::mt19937_64 rng(17);
    auto x = oracles::random_tensor({4, 3, 6, 6}, rng, -2.0f, 5.0f);
    BatchNormStats stats{Tensor({3}), Tensor({3}, 1.0f)};
    auto y = batchnorm2d(constant(x), constant(Tensor({3}, 1.0f)), constant(Tensor({3})), stats,
                         /*train=*/true);
    const int n_per = 4 * 6 * 6;
    for (int c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        for (int n = 0; n < 4; ++n)
            for (int h = 0; h < 6; ++h)
                for (int w = 0; w < 6; ++w) mean += y->value.at4(n, c, h, w);
        mean /= n_per;
        for (int n = 0; n < 4; ++n)
            for (int h = 0; h < 6; ++h)
                for (int w = 0; w < 6; ++w) {
                    const double d = y->value.at4(n, c, h, w) - mean;
                    var += d * d;
                }
        var /= n_per;
        CHECK(std::fabs(mean) < 1e-4);
        CHECK(std::fabs(var - 1.0) < 1e-3);
    }
}

TEST_CASE("batchnorm eval mode uses running statistics") {
    Tensor x({1, 1, 2, 2}, std::vector<float>{2, 4, 6, 8});
    BatchNormStats stats{Tensor({1}, 5.0f), Tensor({1}, 4.0f)};
    auto y = batchnorm2d(constant(x), constant(Tensor({1}, 1.0f)), constant(Tensor({1})), stats,
                         /*train=*/false, 0.9f, 0.0f);
    CHECK(y->value.at4(0, 0, 0, 0) == doctest::Approx((2.0f - 5.0f) / 2.0f));
    CHECK(y->value.at4(0, 0, 1, 1) == doctest::Approx((8.0f - 5.0f) / 2.0f));
}

TEST_CASE("pooling") {
    Tensor x({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
    auto g = global_avg_pool(constant(x));
    CHECK(g->value.shape == Shape{1, 1, 1, 1});
    CHECK(g->value[0] == doctest::Approx(2.5f));

    Tensor y({1, 1, 4, 4});
    for (int i = 0; i < 16; ++i) y[i] = float(i);
    auto p = avg_pool2d(constant(y), 2, 2);
    CHECK(p->value.shape == Shape{1, 1, 2, 2});
    CHECK(p->value.at4(0, 0, 0, 0) == doctest::Approx((0 + 1 + 4 + 5) / 4.0f));
    CHECK(p->value.at4(0, 0, 1, 1) == doctest::Approx((10 + 11 + 14 + 15) / 4.0f));
}
