#include <benchmark/benchmark.h>

#include <random>

#include "ubhess/coupling.hpp"
#include "ubhess/cpf.hpp"
#include "ubhess/discretization.hpp"
#include "ubhess/estimator.hpp"
#include "ubhess/functionals.hpp"
#include "ubhess/oracle.hpp"

namespace ubhess {
namespace {

std::vector<double> random_weights(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(n);
  for (double& v : w) v = e(gen);
  return w;
}

void BM_MaximalCoupling(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Pmf a = Pmf::from_weights(random_weights(n, 1));
  const Pmf b = Pmf::from_weights(random_weights(n, 2));
  Rng rng(3);
  for (auto _ : state) {
    const MaximalCoupling mc(a, b, ResidualCoupling::kInversion);
    for (std::size_t i = 0; i < n; ++i) benchmark::DoNotOptimize(mc.sample(rng));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_MaximalCoupling)->Arg(32)->Arg(256);

void BM_FourWayCoupling(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Pmf a = Pmf::from_weights(random_weights(n, 1)), b = Pmf::from_weights(random_weights(n, 2));
  const Pmf c = Pmf::from_weights(random_weights(n, 3)), d = Pmf::from_weights(random_weights(n, 4));
  Rng rng(5);
  for (auto _ : state) {
    const FourWayCoupling fw(a, b, c, d);
    for (std::size_t i = 0; i < n; ++i) benchmark::DoNotOptimize(fw.sample(rng));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_FourWayCoupling)->Arg(32)->Arg(256);

void BM_EulerUnitStep(benchmark::State& state) {
  const auto model = make_model("mou2d");
  const ParameterVector theta(*model, default_parameters("mou2d"));
  const int level = static_cast<int>(state.range(0));
  Rng rng(1);
  const std::vector<double> x0{1.0, 1.0};
  for (auto _ : state) {
    const BrownianBlock block = draw_brownian_block(level, 2, rng);
    benchmark::DoNotOptimize(euler_unit_step(*model, theta, x0, block));
  }
}
BENCHMARK(BM_EulerUnitStep)->Arg(0)->Arg(4)->Arg(8);

struct OuProblem {
  std::unique_ptr<Model> model = make_model("ou1d");
  ParameterVector theta{*model, {0.46, 0.38}};
  ObservationSequence obs;
  explicit OuProblem(std::size_t n) : obs(simulate_observations(*model, theta, 10, n, 42).observations) {}
};

void BM_CpfSweep(benchmark::State& state) {
  const OuProblem p(50);
  const int level = static_cast<int>(state.range(0));
  ParticleFilter pf(*p.model, p.theta.values(), p.obs);
  Rng rng(2);
  GridPath path = draw_prior_path(*p.model, p.theta.values(), 50, level, rng);
  for (auto _ : state) pf.cpf(path, rng);
}
BENCHMARK(BM_CpfSweep)->Arg(0)->Arg(3);

void BM_CccpfSweep(benchmark::State& state) {
  const OuProblem p(50);
  const int level = static_cast<int>(state.range(0));
  ParticleFilter pf(*p.model, p.theta.values(), p.obs);
  Rng rng(4);
  CoupledLevels st = pf.init_levels(level, rng);
  for (auto _ : state) pf.cccpf(st, rng);
}
BENCHMARK(BM_CccpfSweep)->Arg(1)->Arg(3);

void BM_Functionals(benchmark::State& state) {
  const OuProblem p(50);
  Rng rng(6);
  const GridPath path = draw_prior_path(*p.model, p.theta.values(), 50, 4, rng);
  FunctionalBundle out(2);
  for (auto _ : state) {
    evaluate_functionals(*p.model, p.theta.values(), path, p.obs, true, out);
    benchmark::DoNotOptimize(out.H.data());
  }
}
BENCHMARK(BM_Functionals);

void BM_HessianReplicate(benchmark::State& state) {
  const OuProblem p(10);
  EstimatorConfig cfg;
  cfg.levels = LevelDistribution::truncated(static_cast<int>(state.range(0)));
  ParticleFilter pf(*p.model, p.theta.values(), p.obs, cfg.filter);
  std::size_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(hessian_replicate(pf, cfg, k++));
}
BENCHMARK(BM_HessianReplicate)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_KalmanOracle(benchmark::State& state) {
  const OuProblem p(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(oracle_derivatives(*p.model, p.theta.values(), p.obs));
}
BENCHMARK(BM_KalmanOracle)->Arg(10)->Arg(500);

}  // namespace
}  // namespace ubhess

BENCHMARK_MAIN();
