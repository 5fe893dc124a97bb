#include <doctest.h>

#include <random>

#include "acfseg/checkpoint.hpp"
#include "acfseg/network.hpp"
#include "acfseg/ops.hpp"
#include "oracles.hpp"

using namespace acfseg;

namespace {

NetworkConfig small_config(AcfVariant variant) {
    NetworkConfig c;
    c.num_classes = 4;
    c.base_channels = 8;
    c.reduced_channels = 8;
    c.aspp_branch_channels = 8;
    c.variant = variant;
    return c;
}

}  // namespace

TEST_CASE("output stride 8 and full-resolution logits") {
    AcfNet model(small_config(AcfVariant::Sum), 1);
    std::mt19937_64 rng(2);
    auto image = constant(oracles::random_tensor({1, 3, 64, 64}, rng, 0.0f, 1.0f));
    auto out = model.forward(image, /*train=*/false);
    CHECK(out.top_feature->value.dim(2) == 8);
    CHECK(out.top_feature->value.dim(3) == 8);
    CHECK(out.aux_logits->value.shape == Shape{1, 4, 64, 64});
    CHECK(out.coarse_logits->value.shape == Shape{1, 4, 64, 64});
    CHECK(out.fine_logits->value.shape == Shape{1, 4, 64, 64});
    CHECK(out.aux_logits->value.all_finite());
    CHECK(out.coarse_logits->value.all_finite());
    CHECK(out.fine_logits->value.all_finite());

    // fully convolutional: doubled input doubles the feature map
    auto big = constant(oracles::random_tensor({1, 3, 128, 128}, rng, 0.0f, 1.0f));
    auto out2 = model.forward(big, /*train=*/false);
    CHECK(out2.top_feature->value.dim(2) == 16);
    CHECK(out2.coarse_logits->value.shape == Shape{1, 4, 128, 128});
}

TEST_CASE("baseline variant has no fine branch") {
    AcfNet model(small_config(AcfVariant::None), 1);
    std::mt19937_64 rng(3);
    auto image = constant(oracles::random_tensor({1, 3, 32, 32}, rng, 0.0f, 1.0f));
    auto out = model.forward(image, /*train=*/false);
    CHECK(out.fine_logits == nullptr);
    CHECK(out.fused_feature == nullptr);
    CHECK(out.aux_logits->value.all_finite());
    CHECK(out.coarse_logits->value.all_finite());
}

TEST_CASE("all variants produce finite full-shape logits in both modes") {
    std::mt19937_64 rng(4);
    auto image = constant(oracles::random_tensor({2, 3, 32, 32}, rng, 0.0f, 1.0f));
    for (auto v : {AcfVariant::Sum, AcfVariant::Concat, AcfVariant::CenterOnly}) {
        AcfNet model(small_config(v), 5);
        for (bool train : {true, false}) {
            auto out = model.forward(image, train);
            CHECK(out.fine_logits->value.shape == Shape{2, 4, 32, 32});
            CHECK(out.fine_logits->value.all_finite());
        }
    }
}

TEST_CASE("indivisible input sizes are rejected") {
    AcfNet model(small_config(AcfVariant::Sum), 1);
    auto image = constant(Tensor({1, 3, 60, 64}, 0.5f));
    CHECK_THROWS_AS(model.forward(image, false), std::invalid_argument);
}

TEST_CASE("eval-mode forward is bitwise deterministic") {
    AcfNet model(small_config(AcfVariant::Sum), 9);
    std::mt19937_64 rng(6);
    auto image = constant(oracles::random_tensor({1, 3, 32, 32}, rng, 0.0f, 1.0f));
    auto a = model.forward(image, /*train=*/false);
    auto b = model.forward(image, /*train=*/false);
    CHECK(a.fine_logits->value.data == b.fine_logits->value.data);
    CHECK(a.coarse_logits->value.data == b.coarse_logits->value.data);
}

TEST_CASE("stage-4 units see a larger input footprint than stage-3 units") {
    auto cfg = small_config(AcfVariant::None);
    cfg.use_aspp = false;
    AcfNet model(cfg, 11);
    std::mt19937_64 rng(7);

    // Gradient of one center output pixel; the nonzero support on the input
    // bounds the unit's receptive field. The coarse path runs through the
    // extra dilated stage-4 convolutions, the aux path stops at stage 3.
    auto footprint = [&](bool coarse_path) {
        auto image = parameter(oracles::random_tensor({1, 3, 128, 128}, rng, 0.0f, 1.0f), "probe");
        auto out = model.forward(image, /*train=*/false);
        auto logits = coarse_path ? out.coarse_logits : out.aux_logits;
        Tensor mask(logits->value.shape);
        mask.at4(0, 0, 64, 64) = 1.0f;
        backward(sum_all(mul(logits, constant(mask))));
        int64_t area = 0;
        for (int h = 0; h < 128; ++h)
            for (int w = 0; w < 128; ++w) {
                bool nz = false;
                for (int c = 0; c < 3; ++c) nz = nz || image->grad.at4(0, c, h, w) != 0.0f;
                area += nz ? 1 : 0;
            }
        return area;
    };
    const int64_t aux_area = footprint(false);
    const int64_t coarse_area = footprint(true);
    CHECK(coarse_area > aux_area);
}

TEST_CASE("baseline weights are a subset of the sum variant") {
    AcfNet sum_model(small_config(AcfVariant::Sum), 21);
    auto ckpt = snapshot(sum_model, 0);

    auto cfg = small_config(AcfVariant::None);
    AcfNet baseline(cfg, 99);  // different init; overwritten by restore
    restore(ckpt, baseline);

    std::mt19937_64 rng(8);
    auto image = constant(oracles::random_tensor({1, 3, 32, 32}, rng, 0.0f, 1.0f));
    auto a = sum_model.forward(image, /*train=*/false);
    auto b = baseline.forward(image, /*train=*/false);
    CHECK(a.coarse_logits->value.data == b.coarse_logits->value.data);
}
