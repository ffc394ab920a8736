#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dropf/assembler.hpp"

namespace dropf {

/// Values of every monitored constraint row under one realized error vector
/// (positive = violated), in assembly order.
Vector constraint_values(const HorizonModel& model, const AffinePolicy& policy,
                         const Vector& xi);

/// Realized quadratic operating cost of the policy under one error vector.
double realized_cost(const HorizonModel& model, const AffinePolicy& policy,
                     const Vector& xi);

struct RowStats {
  std::string label;
  double cvar = 0.0;
  double violation_prob = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

struct EvalReport {
  std::vector<RowStats> rows;
  double mean_cost = 0.0;
  double worst_cvar = 0.0;  // max over rows
  int samples = 0;
};

/// Out-of-sample evaluation on held-out data. When train fingerprints are
/// supplied, any overlap with the evaluation rows is an error.
EvalReport out_of_sample_eval(const HorizonModel& model, const AffinePolicy& policy,
                              double alpha, const Dataset& eval_data,
                              const std::vector<std::uint64_t>* train_fingerprints = nullptr);

/// Seeded subsample of `count` distinct rows.
Dataset subsample(const Dataset& data, int count, std::uint64_t seed);

/// Leptokurtic zero-mean synthetic forecast errors: a two-component Gaussian
/// scale mixture, optionally AR(1)-correlated across the horizon. Defaults
/// give excess kurtosis near 5 at unit variance. Deterministic per seed.
struct SynthConfig {
  int count = 1000;
  int dim = 1;             // columns per step
  int horizon = 1;         // stacked steps; sample width = dim * horizon
  double sigma = 1.0;
  double wide_weight = 0.3;
  double wide_scale_ratio = 5.0;
  double time_corr = 0.0;  // AR(1) coefficient across steps
  std::uint64_t seed = 1;
};

Matrix synth_errors(const SynthConfig& config);

/// Persistence-forecast errors of a measured series: row t of the result is
/// series row t+1 minus series row t.
Matrix persistence_errors(const Matrix& series);

/// Fit a Gaussian to the training rows (eigenvalue-floored covariance), draw
/// a synthetic sample set, and solve the epsilon = 0 problem on it.
struct GaussianBaseline {
  Solution solution;
  Matrix synthetic;  // the drawn training set
};

GaussianBaseline gaussian_baseline(const HorizonModel& model, const Dataset& train,
                                   const RiskConfig& risk, int synthetic_count,
                                   std::uint64_t seed, const QpSettings& settings = {});

/// One (rho, epsilon) grid point of a trade-off sweep.
struct SweepPoint {
  double rho = 0.0;
  double epsilon = 0.0;
  SolveStatus status = SolveStatus::max_iterations;
  double objective = 0.0;
  double cost_term = 0.0;
  double dro_term = 0.0;
  double predicted_cvar = 0.0;  // max over rows; NaN at rho = 0
  double oos_cvar = 0.0;        // max over rows on the evaluation subsample
  double oos_violation_prob = 0.0;
  double mean_cost = 0.0;
  std::uint64_t eval_seed = 0;
  std::string error;  // non-empty when the point failed
};

struct SweepResult {
  std::vector<double> rho_grid;
  std::vector<double> eps_grid;
  std::vector<SweepPoint> points;  // rho-major order
};

/// Solves every (rho, epsilon) pair on the training set and evaluates each
/// solution on a seeded subsample of the evaluation pool. Points that fail
/// to solve are recorded and skipped, not fatal.
SweepResult tradeoff_sweep(const HorizonModel& model, const Dataset& train,
                           const Dataset& eval_pool, double alpha,
                           const std::vector<double>& rho_grid,
                           const std::vector<double>& eps_grid, int eval_size,
                           std::uint64_t seed, GroundNorm norm = GroundNorm::l1,
                           const QpSettings& settings = {});

/// Repeated small-sample trials: subsample the pool, solve, compare the
/// predicted tail risk against its out-of-sample value.
struct SampleTrial {
  int train_size = 0;
  int trial = 0;
  bool solved = false;
  double predicted = 0.0;
  double realized = 0.0;
  bool underestimated = false;
};

std::vector<SampleTrial> sampling_error_study(const HorizonModel& model,
                                              const Dataset& pool, const Dataset& eval_pool,
                                              const RiskConfig& risk,
                                              const std::vector<int>& train_sizes,
                                              int trials, std::uint64_t seed,
                                              const QpSettings& settings = {});

}  // namespace dropf
