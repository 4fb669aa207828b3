// Serial reference against OpenMP kernel for each parallel stage.
// Thread count follows OMP_NUM_THREADS.

#include <random>

#include <benchmark/benchmark.h>

#include "cellph/bundle.hpp"
#include "cellph/cluster.hpp"
#include "cellph/dce.hpp"
#include "cellph/dictionary.hpp"
#include "cellph/estimate.hpp"
#include "support/fixtures.hpp"

using namespace cellph;

namespace {

GridSpec tiny_grid() {
  GridSpec g;
  g.n = {2, 2, 3};
  return g;
}

Matrix random_atoms(Eigen::Index m, Eigen::Index n) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Matrix A(m, n);
  for (Eigen::Index j = 0; j < n; ++j) for (Eigen::Index i = 0; i < m; ++i) A(i, j) = U(rng);
  return A;
}

void BM_GenerateSerial(benchmark::State& s) {
  const ForwardConfig c = fixture::fast_config();
  for (auto _ : s) benchmark::DoNotOptimize(generate_serial(tiny_grid(), c));
}

void BM_GenerateParallel(benchmark::State& s) {
  const ForwardConfig c = fixture::fast_config();
  for (auto _ : s) benchmark::DoNotOptimize(generate(tiny_grid(), c));
}

void BM_Cluster(benchmark::State& s) {
  const Matrix atoms = random_atoms(1001, 600);
  KMedoidsOptions o;
  o.restarts = 2;
  o.serial = s.range(0) == 0;
  for (auto _ : s) benchmark::DoNotOptimize(cluster(atoms, 5, o));
  s.SetLabel(o.serial ? "serial" : "parallel");
}

void BM_Dce(benchmark::State& s) {
  const Bundle& b = fixture::small_bundle();
  const ForwardConfig c = fixture::fast_config();
  const Subdictionary& sub = b.subs[0];
  DceOptions o;
  o.samples = 8;
  for (auto _ : s) {
    if (s.range(0) == 0) {
      benchmark::DoNotOptimize(estimate_dce_serial(b.dict, sub.members, sub.W, c, o, 0));
    } else {
      benchmark::DoNotOptimize(estimate_dce(b.dict, sub.members, sub.W, c, o, 0));
    }
  }
  s.SetLabel(s.range(0) == 0 ? "serial" : "parallel");
}

void BM_Phase1(benchmark::State& s) {
  const Bundle& b = fixture::small_bundle();
  const Vector d = b.dict.atoms.col(b.dict.atoms.cols() / 2);
  for (auto _ : s) {
    if (s.range(0) == 0) {
      benchmark::DoNotOptimize(phase1_identify_serial(d, b.subs));
    } else {
      benchmark::DoNotOptimize(phase1_identify(d, b.subs));
    }
  }
  s.SetLabel(s.range(0) == 0 ? "serial" : "parallel");
}

}  // namespace

BENCHMARK(BM_GenerateSerial)->Unit(benchmark::kMillisecond)->Iterations(2);
BENCHMARK(BM_GenerateParallel)->Unit(benchmark::kMillisecond)->Iterations(2);
BENCHMARK(BM_Cluster)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Dce)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(2);
BENCHMARK(BM_Phase1)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
