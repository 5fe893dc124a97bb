#include <benchmark/benchmark.h>

#include <random>

#include "acfseg/acf.hpp"
#include "acfseg/network.hpp"
#include "acfseg/ops.hpp"

using namespace acfseg;

namespace {

Tensor rand_tensor(const Shape& shape, uint64_t seed) {
    Tensor t(shape);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (auto& v : t.data) v = dist(rng);
    return t;
}

void BM_Conv2dForward(benchmark::State& state) {
    auto x = constant(rand_tensor({4, 32, 16, 16}, 1));
    auto w = constant(rand_tensor({32, 32, 3, 3}, 2));
    auto b = constant(rand_tensor({32}, 3));
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 1, 1, 1));
}
BENCHMARK(BM_Conv2dForward);

void BM_Conv2dTrainStep(benchmark::State& state) {
    auto x = constant(rand_tensor({4, 32, 16, 16}, 1));
    auto w = parameter(rand_tensor({32, 32, 3, 3}, 2), "w");
    auto b = parameter(rand_tensor({32}, 3), "b");
    for (auto _ : state) {
        auto out = conv2d(x, w, b, 1, 1, 1);
        backward(sum_all(out));
        w->zero_grad();
        b->zero_grad();
    }
}
BENCHMARK(BM_Conv2dTrainStep);

void BM_ClassCenter(benchmark::State& state) {
    auto f = constant(rand_tensor({4, 32, 8, 8}, 1));
    auto p = constant(rand_tensor({4, 4, 8, 8}, 2));
    for (auto _ : state) benchmark::DoNotOptimize(class_center(f, p));
}
BENCHMARK(BM_ClassCenter);

void BM_ForwardSum(benchmark::State& state) {
    NetworkConfig cfg;
    AcfNet model(cfg, 7);
    auto image = constant(rand_tensor({4, 3, 64, 64}, 3));
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(image, /*train=*/false));
}
BENCHMARK(BM_ForwardSum);

void BM_TrainStepSum(benchmark::State& state) {
    NetworkConfig cfg;
    AcfNet model(cfg, 7);
    auto image = constant(rand_tensor({4, 3, 64, 64}, 3));
    for (auto _ : state) {
        auto out = model.forward(image, /*train=*/true);
        backward(sum_all(scale(out.fine_logits, 1e-3f)));
        model.registry().zero_grads();
    }
}
BENCHMARK(BM_TrainStepSum);

}  // namespace

BENCHMARK_MAIN();
