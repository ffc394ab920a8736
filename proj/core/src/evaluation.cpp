#include "dropf/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_set>

namespace dropf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 1));
}

double uniform01(std::mt19937_64& rng) {
  // 53-bit mantissa, in (0, 1]
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1p-53;
}

double standard_normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

struct DeviceResponse {
  Vector u;
  Vector x;
  Vector c;  // injection per step
};

std::vector<DeviceResponse> device_responses(const HorizonModel& model,
                                             const AffinePolicy& policy,
                                             const Vector& xi) {
  if (policy.D.size() != model.devices.size()) {
    throw ParamError("policy has a different device count than the model");
  }
  std::vector<DeviceResponse> out;
  out.reserve(model.devices.size());
  for (size_t j = 0; j < model.devices.size(); ++j) {
    const auto& dev = model.net.devices[j];
    DeviceResponse r;
    r.u = policy.D[j] * xi + policy.e[j];
    r.x = model.devices[j].A_stack * dev.x0 + model.devices[j].B_stack * r.u;
    r.c = model.devices[j].C_sel * r.x;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

Vector constraint_values(const HorizonModel& model, const AffinePolicy& policy,
                         const Vector& xi) {
  if (xi.size() != model.xi_dim()) {
    std::ostringstream msg;
    msg << "error vector has length " << xi.size() << ", expected " << model.xi_dim();
    throw ParamError(msg.str());
  }
  const auto rows = monitored_rows(model);
  const auto resp = device_responses(model, policy, xi);

  std::vector<Vector> inj_values;
  for (size_t q = 0; q < model.net.injections.size(); ++q) {
    inj_values.push_back(model.net.injections[q].r + model.net.injections[q].G * xi);
  }

  Vector out(static_cast<int>(rows.size()));
  for (size_t v = 0; v < rows.size(); ++v) {
    const auto& row = rows[v];
    if (row.is_line) {
      double flow = 0.0;
      for (size_t j = 0; j < model.devices.size(); ++j) {
        flow += model.devices[j].Gamma.row(row.flow_row).dot(resp[j].c);
      }
      for (size_t q = 0; q < model.injections.size(); ++q) {
        flow += model.injections[q].Gamma.row(row.flow_row).dot(inj_values[q]);
      }
      out(static_cast<int>(v)) = flow - model.p_bar(row.flow_row);
    } else {
      const auto& dev = model.net.devices[row.device];
      double lhs = dev.local.T_loc.row(row.local_row).dot(resp[row.device].x) +
                   dev.local.U_loc.row(row.local_row).dot(resp[row.device].u) +
                   dev.local.Z_loc.row(row.local_row).dot(xi);
      out(static_cast<int>(v)) = lhs - dev.local.w(row.local_row);
    }
  }
  return out;
}

double realized_cost(const HorizonModel& model, const AffinePolicy& policy,
                     const Vector& xi) {
  const auto resp = device_responses(model, policy, xi);
  double total = 0.0;
  for (size_t j = 0; j < model.devices.size(); ++j) {
    const auto& cost = model.net.devices[j].cost;
    total += 0.5 * resp[j].x.dot(cost.H_x * resp[j].x) + cost.f_x.dot(resp[j].x) +
             0.5 * resp[j].u.dot(cost.H_u * resp[j].u) + cost.f_u.dot(resp[j].u) + cost.c;
  }
  return total;
}

EvalReport out_of_sample_eval(const HorizonModel& model, const AffinePolicy& policy,
                              double alpha, const Dataset& eval_data,
                              const std::vector<std::uint64_t>* train_fingerprints) {
  if (eval_data.count() == 0) throw DataError("evaluation set has no rows");
  if (train_fingerprints != nullptr) {
    std::unordered_set<std::uint64_t> train(train_fingerprints->begin(),
                                            train_fingerprints->end());
    for (int i = 0; i < eval_data.count(); ++i) {
      if (train.count(eval_data.fingerprints[i])) {
        std::ostringstream msg;
        msg << "evaluation row " << i << " also appears in the training set; the "
            << "split must be disjoint";
        throw ValidationError(msg.str());
      }
    }
  }

  const auto rows = monitored_rows(model);
  const int V = static_cast<int>(rows.size());
  const int M = eval_data.count();
  std::vector<std::vector<double>> values(V);
  for (auto& col : values) col.reserve(M);

  EvalReport report;
  report.samples = M;
  for (int i = 0; i < M; ++i) {
    Vector xi = eval_data.samples.row(i).transpose();
    Vector g = constraint_values(model, policy, xi);
    for (int v = 0; v < V; ++v) values[v].push_back(g(v));
    report.mean_cost += realized_cost(model, policy, xi);
  }
  report.mean_cost /= M;

  report.worst_cvar = -std::numeric_limits<double>::infinity();
  for (int v = 0; v < V; ++v) {
    RowStats stats;
    stats.label = rows[v].label;
    stats.cvar = empirical_cvar(values[v], alpha);
    int viol = 0;
    double mean = 0.0;
    double worst = -std::numeric_limits<double>::infinity();
    for (double g : values[v]) {
      if (g > 0.0) ++viol;
      mean += g;
      worst = std::max(worst, g);
    }
    stats.violation_prob = static_cast<double>(viol) / M;
    stats.mean = mean / M;
    stats.max = worst;
    report.worst_cvar = std::max(report.worst_cvar, stats.cvar);
    report.rows.push_back(std::move(stats));
  }
  return report;
}

Dataset subsample(const Dataset& data, int count, std::uint64_t seed) {
  if (count < 1 || count > data.count()) {
    std::ostringstream msg;
    msg << "cannot take " << count << " rows from a dataset of " << data.count();
    throw ParamError(msg.str());
  }
  std::vector<int> order(data.count());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (int i = 0; i < count; ++i) {
    int j = i + static_cast<int>(rng() % static_cast<std::uint64_t>(order.size() - i));
    std::swap(order[i], order[j]);
  }
  std::vector<int> pick(order.begin(), order.begin() + count);
  std::sort(pick.begin(), pick.end());

  Dataset out;
  out.samples.resize(count, data.dim());
  out.support_H = data.support_H;
  out.support_d = data.support_d;
  for (int i = 0; i < count; ++i) {
    out.samples.row(i) = data.samples.row(pick[i]);
    out.fingerprints.push_back(data.fingerprints[pick[i]]);
  }
  return out;
}

Matrix synth_errors(const SynthConfig& config) {
  if (config.count < 1) throw ParamError("sample count must be positive");
  if (config.dim < 1 || config.horizon < 1) {
    throw ParamError("dimension and horizon must be positive");
  }
  if (!(config.sigma >= 0.0)) throw ParamError("sigma must be >= 0");
  if (!(config.wide_weight >= 0.0 && config.wide_weight <= 1.0)) {
    throw ParamError("wide component weight must lie in [0, 1]");
  }
  if (!(config.wide_scale_ratio >= 1.0)) {
    throw ParamError("wide scale ratio must be >= 1");
  }
  if (!(std::abs(config.time_corr) < 1.0)) {
    throw ParamError("time correlation must lie in (-1, 1)");
  }

  // component scales for unit marginal variance before sigma
  const double w2 = config.wide_weight;
  const double r = config.wide_scale_ratio;
  const double s_narrow = 1.0 / std::sqrt((1.0 - w2) + w2 * r * r);
  const double s_wide = r * s_narrow;

  std::mt19937_64 rng(config.seed);
  const int width = config.dim * config.horizon;
  Matrix out(config.count, width);
  for (int i = 0; i < config.count; ++i) {
    for (int c = 0; c < config.dim; ++c) {
      double prev = 0.0;
      for (int t = 0; t < config.horizon; ++t) {
        double scale = uniform01(rng) <= w2 ? s_wide : s_narrow;
        double x = standard_normal(rng) * scale;
        double y = t == 0 ? x
                          : config.time_corr * prev +
                                std::sqrt(1.0 - config.time_corr * config.time_corr) * x;
        prev = y;
        out(i, t * config.dim + c) = config.sigma * y;
      }
    }
  }
  return out;
}

Matrix persistence_errors(const Matrix& series) {
  if (series.rows() < 2) {
    throw DataError("persistence errors need at least two measurement rows");
  }
  const int r = static_cast<int>(series.rows());
  return series.bottomRows(r - 1) - series.topRows(r - 1);
}

GaussianBaseline gaussian_baseline(const HorizonModel& model, const Dataset& train,
                                   const RiskConfig& risk, int synthetic_count,
                                   std::uint64_t seed, const QpSettings& settings) {
  if (synthetic_count < 1) throw ParamError("synthetic sample count must be positive");
  const int N = train.count();
  const int dim = train.dim();
  Vector mu = train.samples.colwise().mean().transpose();
  Matrix centered = train.samples.rowwise() - mu.transpose();
  Matrix cov = N > 1 ? Matrix(centered.transpose() * centered / (N - 1))
                     : Matrix(Matrix::Zero(dim, dim));

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  double floor = 1e-12 * std::max(0.0, eig.eigenvalues().sum());
  Vector scales = eig.eigenvalues().cwiseMax(floor).cwiseSqrt();

  std::mt19937_64 rng(seed);
  Matrix synthetic(synthetic_count, dim);
  for (int i = 0; i < synthetic_count; ++i) {
    Vector z(dim);
    for (int c = 0; c < dim; ++c) z(c) = standard_normal(rng);
    synthetic.row(i) =
        (mu + eig.eigenvectors() * scales.cwiseProduct(z)).transpose();
  }

  RiskConfig saa = risk;
  saa.epsilon = 0.0;
  GaussianBaseline baseline;
  baseline.synthetic = synthetic;
  // the fitted model has unbounded support; any polytope on the data is dropped
  Dataset synth_data = make_dataset(synthetic);
  baseline.solution = solve_opf(model, synth_data, saa, settings);
  return baseline;
}

SweepResult tradeoff_sweep(const HorizonModel& model, const Dataset& train,
                           const Dataset& eval_pool, double alpha,
                           const std::vector<double>& rho_grid,
                           const std::vector<double>& eps_grid, int eval_size,
                           std::uint64_t seed, GroundNorm norm,
                           const QpSettings& settings) {
  if (rho_grid.empty() || eps_grid.empty()) {
    throw ParamError("sweep grids must be non-empty");
  }
  SweepResult result;
  result.rho_grid = rho_grid;
  result.eps_grid = eps_grid;
  const int n_points = static_cast<int>(rho_grid.size() * eps_grid.size());
  result.points.resize(n_points);

  auto run_point = [&](int p) {
    const int ir = p / static_cast<int>(eps_grid.size());
    const int ie = p % static_cast<int>(eps_grid.size());
    SweepPoint& point = result.points[p];
    point.rho = rho_grid[ir];
    point.epsilon = eps_grid[ie];
    point.eval_seed = derive_seed(seed, static_cast<std::uint64_t>(p));
    try {
      RiskConfig risk;
      risk.alpha = alpha;
      risk.rho = point.rho;
      risk.epsilon = point.epsilon;
      risk.norm = norm;
      Solution sol = solve_opf(model, train, risk, settings);
      point.status = sol.status;
      if (sol.status != SolveStatus::solved) {
        point.error = "solve ended with status " + to_string(sol.status);
        return;
      }
      point.objective = sol.objective;
      point.cost_term = sol.cost_term;
      point.dro_term = sol.dro_term;
      point.predicted_cvar = sol.predicted_cvar.empty()
                                 ? std::numeric_limits<double>::quiet_NaN()
                                 : *std::max_element(sol.predicted_cvar.begin(),
                                                     sol.predicted_cvar.end());
      Dataset eval = eval_size < eval_pool.count()
                         ? subsample(eval_pool, eval_size, point.eval_seed)
                         : eval_pool;
      EvalReport report =
          out_of_sample_eval(model, sol.policy, alpha, eval, &train.fingerprints);
      point.oos_cvar = report.worst_cvar;
      double viol = 0.0;
      for (const auto& row : report.rows) viol = std::max(viol, row.violation_prob);
      point.oos_violation_prob = viol;
      point.mean_cost = report.mean_cost;
    } catch (const std::exception& ex) {
      point.error = ex.what();
    }
  };

  unsigned hw = std::thread::hardware_concurrency();
  int n_threads = std::min<int>(n_points, hw > 0 ? static_cast<int>(hw) : 1);
  if (n_threads <= 1) {
    for (int p = 0; p < n_points; ++p) run_point(p);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    for (int t = 0; t < n_threads; ++t) {
      workers.emplace_back([&]() {
        while (true) {
          int p = next.fetch_add(1);
          if (p >= n_points) break;
          run_point(p);
        }
      });
    }
    for (auto& worker : workers) worker.join();
  }
  return result;
}

std::vector<SampleTrial> sampling_error_study(const HorizonModel& model,
                                              const Dataset& pool, const Dataset& eval_pool,
                                              const RiskConfig& risk,
                                              const std::vector<int>& train_sizes,
                                              int trials, std::uint64_t seed,
                                              const QpSettings& settings) {
  if (trials < 1) throw ParamError("trial count must be positive");
  std::vector<SampleTrial> out;
  for (size_t si = 0; si < train_sizes.size(); ++si) {
    for (int trial = 0; trial < trials; ++trial) {
      SampleTrial record;
      record.train_size = train_sizes[si];
      record.trial = trial;
      std::uint64_t sub_seed =
          derive_seed(seed, static_cast<std::uint64_t>(si * 1000003 + trial));
      Dataset sub = subsample(pool, train_sizes[si], sub_seed);
      Solution sol = solve_opf(model, sub, risk, settings);
      record.solved = sol.status == SolveStatus::solved;
      if (record.solved) {
        record.predicted = *std::max_element(sol.predicted_cvar.begin(),
                                             sol.predicted_cvar.end());
        EvalReport report =
            out_of_sample_eval(model, sol.policy, risk.alpha, eval_pool, nullptr);
        record.realized = report.worst_cvar;
        record.underestimated = record.predicted < record.realized;
      }
      out.push_back(record);
    }
  }
  return out;
}

}  // namespace dropf
