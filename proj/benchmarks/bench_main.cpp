#include <benchmark/benchmark.h>

#include <random>

#include <dropf/dropf.hpp>

#include "case118.hpp"

namespace {

using namespace dropf;

Matrix gaussian_samples(int n, int dim, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  Matrix m(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) m(i, j) = normal(rng);
  }
  return m;
}

void bm_ptdf_118(benchmark::State& state) {
  NetworkCase net = dropf_cases::build_case118();
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_ptdf(net));
  }
}
BENCHMARK(bm_ptdf_118);

void bm_validate_case_118(benchmark::State& state) {
  NetworkCase net = dropf_cases::build_case118();
  for (auto _ : state) {
    benchmark::DoNotOptimize(validate_case(net));
  }
}
BENCHMARK(bm_validate_case_118);

void bm_assemble_118(benchmark::State& state) {
  HorizonModel model = validate_case(dropf_cases::build_case118());
  PolicyLayout layout = make_policy_layout(model);
  Dataset train = make_dataset(gaussian_samples(static_cast<int>(state.range(0)),
                                                model.xi_dim(), 300.0, 11));
  RiskConfig risk;
  risk.rho = 2000.0;
  risk.epsilon = 40.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(assemble(model, layout, train, risk));
  }
}
BENCHMARK(bm_assemble_118)->Arg(50)->Arg(100)->Arg(200);

void bm_solve_118(benchmark::State& state) {
  HorizonModel model = validate_case(dropf_cases::build_case118());
  Dataset train = make_dataset(gaussian_samples(static_cast<int>(state.range(0)),
                                                model.xi_dim(), 300.0, 11));
  RiskConfig risk;
  risk.rho = 2000.0;
  risk.epsilon = 40.0;
  for (auto _ : state) {
    Solution sol = solve_opf(model, train, risk);
    benchmark::DoNotOptimize(sol);
  }
}
BENCHMARK(bm_solve_118)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void bm_empirical_cvar(benchmark::State& state) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(static_cast<size_t>(state.range(0)));
  for (auto& x : v) x = normal(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(empirical_cvar(v, 0.1));
  }
}
BENCHMARK(bm_empirical_cvar)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
