#include <benchmark/benchmark.h>

#include "ics/marginal.hpp"
#include "ics/simulate.hpp"

namespace {

using namespace ics;

const ModelData& joint_data() {
  static const ModelData data = [] {
    const ModelSpec spec{Family::JOINT};
    return ModelData::build(
        simulate_dataset(spec, default_truth(Family::JOINT), DesignPreset::table1(4), 11));
  }();
  return data;
}

void BM_marginal_joint_parallel(benchmark::State& state) {
  const ModelSpec spec{Family::JOINT};
  const auto truth = default_truth(Family::JOINT);
  for (auto _ : state) benchmark::DoNotOptimize(marginal_loglik(spec, truth.theta, joint_data()));
}
BENCHMARK(BM_marginal_joint_parallel)->Unit(benchmark::kMillisecond);

void BM_marginal_joint_serial(benchmark::State& state) {
  const ModelSpec spec{Family::JOINT};
  const auto truth = default_truth(Family::JOINT);
  for (auto _ : state)
    benchmark::DoNotOptimize(marginal_loglik_serial(spec, truth.theta, joint_data()));
}
BENCHMARK(BM_marginal_joint_serial)->Unit(benchmark::kMillisecond);

void BM_simulate_parallel(benchmark::State& state) {
  const ModelSpec spec{Family::JOINT};
  const auto truth = default_truth(Family::JOINT);
  const auto design = DesignPreset::table1(4);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_with_latents(spec, truth, design, 5));
}
BENCHMARK(BM_simulate_parallel)->Unit(benchmark::kMillisecond);

void BM_simulate_serial(benchmark::State& state) {
  const ModelSpec spec{Family::JOINT};
  const auto truth = default_truth(Family::JOINT);
  const auto design = DesignPreset::table1(4);
  for (auto _ : state)
    benchmark::DoNotOptimize(simulate_with_latents_serial(spec, truth, design, 5));
}
BENCHMARK(BM_simulate_serial)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
