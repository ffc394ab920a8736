#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include <dropf/evaluation.hpp>

#include "test_cases.hpp"

using namespace dropf;

namespace {

HorizonModel wind_model(double limit = 0.6) {
  NetworkCase net = testsupport::two_gen_wind(limit, 1.0);
  return validate_case(net);
}

AffinePolicy balanced_policy(const HorizonModel& model) {
  AffinePolicy policy;
  policy.D = {Matrix::Constant(1, 1, -1.0), Matrix::Zero(1, 1)};
  policy.e = {Vector::Constant(1, -1.0), Vector::Zero(1)};
  return policy;
}

}  // namespace

TEST_CASE("constraint values report flow minus limit in both directions") {
  HorizonModel model = wind_model(0.6);
  AffinePolicy policy = balanced_policy(model);
  Vector xi = Vector::Constant(1, 0.25);

  // g1 absorbs the error at bus 1: its injection is -1.25; wind pushes 1.25
  // into bus 2. Flow on 1-2 is ptdf * injections = -1 * (wind at bus 2 side)
  Vector values = constraint_values(model, policy, xi);
  REQUIRE(values.size() == 2);  // fwd and rev of the single line, T = 1
  const double flow = -1.0 * (1.0 + 0.25);  // from->to orientation
  CHECK(values(0) == doctest::Approx(flow - 0.6));
  CHECK(values(1) == doctest::Approx(-flow - 0.6));
}

TEST_CASE("realized cost matches the hand computation") {
  HorizonModel model = wind_model();
  AffinePolicy policy = balanced_policy(model);
  Vector xi = Vector::Constant(1, 0.5);
  // u1 = -1.5, u2 = 0; cost = 1/2 u1^2 + 4/2 u2^2
  CHECK(realized_cost(model, policy, xi) == doctest::Approx(0.5 * 1.5 * 1.5));
}

TEST_CASE("out-of-sample statistics match direct per-row computations") {
  HorizonModel model = wind_model(0.6);
  AffinePolicy policy = balanced_policy(model);
  std::mt19937_64 rng(99);
  Matrix samples = testsupport::random_samples(rng, 200, 1, 0.8);
  Dataset eval = make_dataset(samples);

  const double alpha = 0.1;
  EvalReport report = out_of_sample_eval(model, policy, alpha, eval);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.samples == 200);

  std::vector<double> fwd, rev;
  double cost_acc = 0.0;
  int viol = 0;
  for (int i = 0; i < 200; ++i) {
    Vector xi = samples.row(i).transpose();
    Vector values = constraint_values(model, policy, xi);
    fwd.push_back(values(0));
    rev.push_back(values(1));
    if (values(0) > 0.0) ++viol;
    cost_acc += realized_cost(model, policy, xi);
  }
  CHECK(report.rows[0].cvar == doctest::Approx(empirical_cvar(fwd, alpha)));
  CHECK(report.rows[1].cvar == doctest::Approx(empirical_cvar(rev, alpha)));
  CHECK(report.rows[0].violation_prob == doctest::Approx(viol / 200.0));
  CHECK(report.mean_cost == doctest::Approx(cost_acc / 200.0));
  CHECK(report.worst_cvar ==
        doctest::Approx(std::max(report.rows[0].cvar, report.rows[1].cvar)));
  CHECK(report.rows[0].max == doctest::Approx(*std::max_element(fwd.begin(), fwd.end())));
}

TEST_CASE("evaluation rejects rows it was trained on") {
  HorizonModel model = wind_model();
  AffinePolicy policy = balanced_policy(model);
  std::mt19937_64 rng(7);
  Matrix samples = testsupport::random_samples(rng, 20, 1, 0.5);
  Dataset train = make_dataset(samples.topRows(10));
  Matrix eval_rows(11, 1);
  eval_rows.topRows(10) = samples.bottomRows(10);
  eval_rows.row(10) = samples.row(3);  // leaked training row
  Dataset eval = make_dataset(eval_rows);
  CHECK_THROWS_AS(out_of_sample_eval(model, policy, 0.1, eval, &train.fingerprints),
                  ValidationError);
  Dataset clean = make_dataset(samples.bottomRows(10));
  CHECK_NOTHROW(out_of_sample_eval(model, policy, 0.1, clean, &train.fingerprints));
}

TEST_CASE("subsampling is seeded, sized, and duplicate-free") {
  std::mt19937_64 rng(55);
  Matrix samples = testsupport::random_samples(rng, 50, 2, 1.0);
  Dataset pool = make_dataset(samples);
  Dataset a = subsample(pool, 12, 42);
  Dataset b = subsample(pool, 12, 42);
  Dataset c = subsample(pool, 12, 43);
  REQUIRE(a.count() == 12);
  CHECK(a.samples.isApprox(b.samples));
  CHECK_FALSE(a.samples.isApprox(c.samples));
  std::set<std::uint64_t> seen(a.fingerprints.begin(), a.fingerprints.end());
  CHECK(seen.size() == 12);
  CHECK_THROWS_AS(subsample(pool, 51, 1), ParamError);
}

TEST_CASE("synthetic errors are deterministic per seed and near-unit scale") {
  SynthConfig config;
  config.count = 20000;
  config.sigma = 1.0;
  config.seed = 9;
  Matrix a = synth_errors(config);
  Matrix b = synth_errors(config);
  CHECK(a.isApprox(b));
  config.seed = 10;
  Matrix c = synth_errors(config);
  CHECK_FALSE(a.isApprox(c));

  REQUIRE(a.rows() == 20000);
  REQUIRE(a.cols() == 1);
  const double mean = a.col(0).mean();
  const double var = (a.col(0).array() - mean).square().mean();
  CHECK(std::abs(mean) <= 0.05);
  CHECK(var == doctest::Approx(1.0).epsilon(0.1));

  // heavier than Gaussian tails: excess kurtosis clearly positive
  const double m4 = (a.col(0).array() - mean).pow(4).mean();
  const double kurt = m4 / (var * var) - 3.0;
  CHECK(kurt > 2.0);
}

TEST_CASE("synthetic horizon correlation follows the AR(1) coefficient") {
  SynthConfig config;
  config.count = 30000;
  config.horizon = 2;
  config.time_corr = 0.8;
  config.seed = 4;
  Matrix a = synth_errors(config);
  REQUIRE(a.cols() == 2);
  const double c01 = (a.col(0).array() * a.col(1).array()).mean();
  const double v0 = a.col(0).array().square().mean();
  CHECK(c01 / v0 == doctest::Approx(0.8).epsilon(0.05));
}

TEST_CASE("persistence errors difference consecutive rows") {
  Matrix series(4, 2);
  series << 1.0, 10.0, 2.0, 8.0, 4.0, 9.0, 3.0, 9.5;
  Matrix err = persistence_errors(series);
  REQUIRE(err.rows() == 3);
  CHECK(err(0, 0) == doctest::Approx(1.0));
  CHECK(err(1, 0) == doctest::Approx(2.0));
  CHECK(err(2, 0) == doctest::Approx(-1.0));
  CHECK(err(0, 1) == doctest::Approx(-2.0));
  CHECK_THROWS_AS(persistence_errors(Matrix(1, 2)), DataError);
}

TEST_CASE("the gaussian baseline trains on light-tailed surrogate data") {
  HorizonModel model = wind_model(0.5);
  SynthConfig config;
  config.count = 300;
  config.sigma = 0.4;
  config.seed = 21;
  Dataset train = make_dataset(synth_errors(config));
  RiskConfig risk;
  risk.rho = 1.0;
  risk.epsilon = 0.05;  // baseline must ignore this and solve at zero radius
  GaussianBaseline base = gaussian_baseline(model, train, risk, 400, 77);
  REQUIRE(base.solution.status == SolveStatus::solved);
  CHECK(base.synthetic.rows() == 400);

  // surrogate matches first and second moments of the training rows
  const double mu_train = train.samples.col(0).mean();
  const double mu_synth = base.synthetic.col(0).mean();
  const double sd_train =
      std::sqrt((train.samples.col(0).array() - mu_train).square().mean());
  const double sd_synth =
      std::sqrt((base.synthetic.col(0).array() - mu_synth).square().mean());
  CHECK(std::abs(mu_synth - mu_train) <= 0.2 * sd_train);
  CHECK(sd_synth == doctest::Approx(sd_train).epsilon(0.15));

  // determinism
  GaussianBaseline again = gaussian_baseline(model, train, risk, 400, 77);
  CHECK(base.synthetic.isApprox(again.synthetic));
}

TEST_CASE("the trade-off sweep covers the grid in rho-major order") {
  HorizonModel model = wind_model(0.5);
  SynthConfig config;
  config.count = 60;
  config.sigma = 0.4;
  config.seed = 3;
  Dataset train = make_dataset(synth_errors(config));
  config.seed = 4;
  config.count = 200;
  Dataset pool = make_dataset(synth_errors(config));

  std::vector<double> rho_grid{0.5, 2.0};
  std::vector<double> eps_grid{0.0, 0.05};
  SweepResult sweep = tradeoff_sweep(model, train, pool, 0.1, rho_grid, eps_grid, 100, 11);
  REQUIRE(sweep.points.size() == 4);
  CHECK(sweep.points[0].rho == doctest::Approx(0.5));
  CHECK(sweep.points[0].epsilon == doctest::Approx(0.0));
  CHECK(sweep.points[1].epsilon == doctest::Approx(0.05));
  CHECK(sweep.points[2].rho == doctest::Approx(2.0));
  for (const auto& p : sweep.points) {
    REQUIRE(p.status == SolveStatus::solved);
    CHECK(p.error.empty());
    CHECK(std::isfinite(p.oos_cvar));
    CHECK(p.objective == doctest::Approx(p.cost_term + p.dro_term)
                             .epsilon(1e-8)
                             .scale(1.0 + std::abs(p.objective)));
  }
  // same rho: larger radius costs at least as much in-sample
  CHECK(sweep.points[1].objective >= sweep.points[0].objective - 1e-8);
  CHECK(sweep.points[3].objective >= sweep.points[2].objective - 1e-8);
  // rerunning with the same seed reproduces the evaluation numbers
  SweepResult again = tradeoff_sweep(model, train, pool, 0.1, rho_grid, eps_grid, 100, 11);
  for (size_t i = 0; i < sweep.points.size(); ++i) {
    CHECK(sweep.points[i].oos_cvar == doctest::Approx(again.points[i].oos_cvar));
    CHECK(sweep.points[i].eval_seed == again.points[i].eval_seed);
  }
}

TEST_CASE("the sampling study counts underestimation per trial") {
  HorizonModel model = wind_model(0.5);
  SynthConfig config;
  config.count = 400;
  config.sigma = 0.4;
  config.seed = 31;
  Dataset pool = make_dataset(synth_errors(config));
  config.seed = 32;
  config.count = 500;
  Dataset eval_pool = make_dataset(synth_errors(config));

  RiskConfig risk;
  risk.rho = 1.0;
  risk.epsilon = 0.0;
  auto trials = sampling_error_study(model, pool, eval_pool, risk, {10, 40}, 3, 5);
  REQUIRE(trials.size() == 6);
  for (const auto& t : trials) {
    REQUIRE(t.solved);
    CHECK((t.train_size == 10 || t.train_size == 40));
    CHECK(t.underestimated == (t.predicted < t.realized));
    CHECK(std::isfinite(t.predicted));
    CHECK(std::isfinite(t.realized));
  }
  // deterministic under the same seed
  auto again = sampling_error_study(model, pool, eval_pool, risk, {10, 40}, 3, 5);
  for (size_t i = 0; i < trials.size(); ++i) {
    CHECK(trials[i].predicted == doctest::Approx(again[i].predicted));
    CHECK(trials[i].realized == doctest::Approx(again[i].realized));
  }
}
