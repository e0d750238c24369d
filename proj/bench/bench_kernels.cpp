// Serial reference vs OpenMP kernels. Every pair computes bit-identical results; the
// benchmark measures only the speed-up. Run with OMP_NUM_THREADS to vary the team size.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "ghostcert/attacks.hpp"
#include "ghostcert/conv_net.hpp"
#include "ghostcert/dataset.hpp"
#include "ghostcert/regions.hpp"
#include "ghostcert/smoothing.hpp"
#include "ghostcert/training.hpp"

using namespace ghostcert;

namespace {

struct Fixture {
  Dataset data = make_glyph_digits(64, 3);
  SmallConvNet net{default_architecture(data), 5};
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

void label(benchmark::State& state) {
  state.SetLabel(state.range(0) == 0 ? "serial" : "openmp x" + std::to_string(omp_get_max_threads()));
}

void BM_MonteCarloCounts(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_class_counts(f.net, f.data.images[0], 0.25, 200, 11, mode(state)));
  }
  state.SetItemsProcessed(state.iterations() * 200);
  label(state);
}

void BM_NoiseAveragedGradient(benchmark::State& state) {
  const auto& f = fixture();
  const Image delta(f.data.shape, 0.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        noise_averaged_gradient(f.net, f.data.images[1], delta, f.data.labels[1], 0.25, 32, 7, 0, mode(state)));
  }
  state.SetItemsProcessed(state.iterations() * 32);
  label(state);
}

void BM_GhostCertAttack(benchmark::State& state) {
  const auto& f = fixture();
  AttackConfig cfg;
  cfg.epsilon = 1.25;
  cfg.step_size = 2.5 * cfg.epsilon / 20;
  cfg.steps = 20;
  cfg.sigma = 0.25;
  cfg.noise_batch = 32;
  cfg.seed = 9;
  const Mask mask(f.data.shape.height, f.data.shape.width, true);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ghostcert_attack(f.net, f.data.images[2], f.data.labels[2], mask, cfg, mode(state)));
  }
  label(state);
}

void BM_TrainingEpoch(benchmark::State& state) {
  const auto& f = fixture();
  TrainingConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_noise_augmented(f.data, default_architecture(f.data), cfg, nullptr, mode(state)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.data.size()));
  label(state);
}

}  // namespace

BENCHMARK(BM_MonteCarloCounts)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NoiseAveragedGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GhostCertAttack)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainingEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
