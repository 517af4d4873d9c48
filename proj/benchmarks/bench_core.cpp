#include <benchmark/benchmark.h>

#include "relax/bptt.hpp"
#include "relax/model.hpp"
#include "relax/train.hpp"

using namespace relax;

namespace {

ModelParams bench_model(std::size_t x, std::size_t h, std::size_t y, std::size_t l_w) {
    ModelParams p = make_model(x, h, y, l_w);
    Rng rng(7);
    init_params(p, rng);
    return p;
}

void BM_Matvec(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    Matrix m(n, n);
    for (double& v : m.data) v = rng.next_double();
    Vector x = draw_uniform(rng, -1, 1, n);
    for (auto _ : state) {
        Vector out = matvec(m, x);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_Matvec)->Arg(64)->Arg(256)->Arg(1024);

void BM_Forward(benchmark::State& state) {
    const int l_t = static_cast<int>(state.range(0));
    ModelParams p = bench_model(3072, 64, 10, 2);
    LayerSchedule sched = LayerSchedule::periodic(2, l_t);
    Rng rng(2);
    Vector image = draw_uniform(rng, -1, 1, 3072);
    InputSequence input = InputSequence::repeated(image, l_t);
    for (auto _ : state) {
        ForwardTrace tr = forward(p, sched, input);
        benchmark::DoNotOptimize(tr.logits.data.data());
    }
}
BENCHMARK(BM_Forward)->Arg(4)->Arg(12);

void BM_ForwardBackward(benchmark::State& state) {
    const int l_t = static_cast<int>(state.range(0));
    ModelParams p = bench_model(3072, 64, 10, 2);
    LayerSchedule sched = LayerSchedule::periodic(2, l_t);
    Rng rng(3);
    Vector image = draw_uniform(rng, -1, 1, 3072);
    std::vector<TrainExample> batch;
    batch.push_back({InputSequence::repeated(image, l_t), 3});
    for (auto _ : state) {
        LossAndGrad lg = loss_and_grad(p, sched, batch, LossKind::softmax_cross_entropy);
        benchmark::DoNotOptimize(lg.loss);
    }
}
BENCHMARK(BM_ForwardBackward)->Arg(4)->Arg(12);

void BM_AdamStep(benchmark::State& state) {
    ModelParams p = bench_model(3072, 64, 10, 12);
    Gradients g = Gradients::zeros_like(p);
    Rng rng(4);
    for (auto& view : tensor_views(g, false)) {
        for (std::size_t i = 0; i < view.len; ++i) view.data[i] = rng.next_double() - 0.5;
    }
    AdamState st = AdamState::init(p);
    for (auto _ : state) {
        adam_step(p, g, st);
        benchmark::DoNotOptimize(p.alpha);
    }
}
BENCHMARK(BM_AdamStep);

void BM_OscActivation(benchmark::State& state) {
    OscConfig cfg;
    Rng rng(5);
    Vector h = draw_uniform(rng, -1, 1, 64);
    Vector drive = draw_uniform(rng, -1, 1, 64);
    for (auto _ : state) {
        Vector out = osc_activation(h, drive, cfg);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_OscActivation);

} // namespace

BENCHMARK_MAIN();
