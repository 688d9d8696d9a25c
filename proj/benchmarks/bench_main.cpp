#include <benchmark/benchmark.h>

#include "team/baselines.hpp"
#include "team/derivatives.hpp"
#include "team/gauss_newton.hpp"
#include "team/quadratic.hpp"

namespace {

using namespace team;

QuadraticModel random_quadratic(int n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix a(n, n);
  for (auto& v : a.reshaped()) v = rng.uniform(-1.0, 1.0);
  Vector g(n);
  for (auto& v : g) v = rng.uniform(-1.0, 1.0);
  QuadraticModel qm;
  qm.H = 0.5 * (a + a.transpose());
  qm.g = g;
  qm.c0 = 0.0;
  return qm;
}

Model desk_model() { return Model::random({784, 128, 64, 10}, Activation::tanh, 1); }

Image mid_grey() { return Image(Vector::Constant(784, 0.5), 28, 28); }

void BM_Decompose(benchmark::State& state) {
  const QuadraticModel qm = random_quadratic(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(decompose(qm));
}
BENCHMARK(BM_Decompose)->Arg(64)->Arg(256)->Arg(784)->Unit(benchmark::kMillisecond);

void BM_TrustRegionSolve(benchmark::State& state) {
  const QuadraticModel qm = random_quadratic(static_cast<int>(state.range(0)), 2);
  const SpectralQuadratic sq = decompose(qm);
  double C = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_trust_region_l2(qm, sq, C));
    C = C < 10.0 ? C + 0.01 : 0.1;
  }
}
BENCHMARK(BM_TrustRegionSolve)->Arg(64)->Arg(256)->Arg(784)->Unit(benchmark::kMicrosecond);

void BM_SolveLinf(benchmark::State& state) {
  const QuadraticModel qm = random_quadratic(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(solve_linf(qm, 0.01, 20));
}
BENCHMARK(BM_SolveLinf)->Arg(64)->Arg(784)->Unit(benchmark::kMicrosecond);

void BM_InputGradient(benchmark::State& state) {
  const Model m = desk_model();
  const Vector x = mid_grey().pixels();
  const ObjectiveSpec obj = ObjectiveSpec::numbered(1, predict(m, x));
  for (auto _ : state) benchmark::DoNotOptimize(input_gradient(m, x, obj));
}
BENCHMARK(BM_InputGradient)->Unit(benchmark::kMicrosecond);

void BM_InputHessian(benchmark::State& state) {
  const Model m = desk_model();
  const Vector x = mid_grey().pixels();
  const ObjectiveSpec obj = ObjectiveSpec::numbered(1, predict(m, x));
  for (auto _ : state) benchmark::DoNotOptimize(input_hessian(m, x, obj));
}
BENCHMARK(BM_InputHessian)->Unit(benchmark::kMillisecond);

void BM_GnStep(benchmark::State& state) {
  const Model m = desk_model();
  const Image x = mid_grey();
  GnConfig c;
  c.objective = ObjectiveSpec::numbered(4, predict(m, x));
  const Vector delta = Vector::Zero(784);
  for (auto _ : state) benchmark::DoNotOptimize(gn_step(m, x, delta, c));
}
BENCHMARK(BM_GnStep)->Unit(benchmark::kMicrosecond);

void BM_Fgsm(benchmark::State& state) {
  const Model m = desk_model();
  const Image x = mid_grey();
  const int y = predict(m, x);
  for (auto _ : state) benchmark::DoNotOptimize(fgsm(m, x, y, BaselineConfig{}));
}
BENCHMARK(BM_Fgsm)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
