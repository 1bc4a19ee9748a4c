#include "aal/data.hpp"
#include "aal/metrics.hpp"
#include "aal/trainer.hpp"

#include <benchmark/benchmark.h>

namespace {

void bm_compute_gradients(benchmark::State& state) {
    const aal::OsdaDataset data = aal::gen_gaussian_osda({}, 0);
    aal::TrainConfig cfg;
    cfg.batch_size = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    const aal::ModelBundle model = aal::init_bundle(aal::architecture_for(cfg, data.d_in(), data.c), rng);
    const aal::Batch batch = aal::sample_batch(data.training_view(), cfg, rng);
    for (auto _ : state) {
        auto g = aal::compute_gradients(model, batch, cfg, 1.0, aal::DropoutPlan{0.5, 3});
        benchmark::DoNotOptimize(g.grads.data());
    }
}
BENCHMARK(bm_compute_gradients)->Arg(32)->Arg(64)->Arg(128);

void bm_evaluate(benchmark::State& state) {
    const aal::OsdaDataset data = aal::gen_gaussian_osda({}, 0);
    aal::TrainConfig cfg;
    std::mt19937_64 rng(1);
    const aal::ModelBundle model = aal::init_bundle(aal::architecture_for(cfg, data.d_in(), data.c), rng);
    for (auto _ : state) benchmark::DoNotOptimize(aal::evaluate(model, data).os);
}
BENCHMARK(bm_evaluate);

void bm_metrics(benchmark::State& state) {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> cat(0, 3);
    std::vector<int> t(10000);
    std::vector<int> p(10000);
    for (auto& v : t) v = cat(rng);
    for (auto& v : p) v = cat(rng);
    for (auto _ : state) benchmark::DoNotOptimize(aal::evaluate_predictions(t, p, 3).os);
}
BENCHMARK(bm_metrics);

} // namespace

BENCHMARK_MAIN();
