#include "cli_app.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include <dropf/dropf.hpp>

namespace dropf_cli {

namespace {

using namespace dropf;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitSolve = 3;

struct CommonArgs {
  std::string case_path;
  std::string data_path;
  double alpha = 0.1;
  double rho = 1.0;
  double epsilon = 0.0;
  int train_size = 0;  // 0 = use every row
  int eval_size = 0;   // 0 = use the whole evaluation pool
  std::uint64_t seed = 1;
  std::string out;
  std::string ground_norm = "l1";
  std::vector<std::string> monitored;
};

GroundNorm parse_norm(const std::string& name) {
  if (name == "l1") return GroundNorm::l1;
  if (name == "linf") return GroundNorm::linf;
  throw ParamError("ground norm must be 'l1' or 'linf', got '" + name + "'");
}

std::string utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunManifest make_manifest(const CommonArgs& args) {
  RunManifest m;
  m.case_path = args.case_path;
  if (!args.case_path.empty()) m.case_hash = file_hash(args.case_path);
  m.data_path = args.data_path;
  if (!args.data_path.empty()) m.data_hash = file_hash(args.data_path);
  m.alpha = args.alpha;
  m.rho = args.rho;
  m.epsilon = args.epsilon;
  m.ground_norm = args.ground_norm;
  m.seed = args.seed;
  m.tool_version = kVersion;
  m.created_utc = utc_now();
  return m;
}

NetworkCase load_case_with_overrides(const CommonArgs& args) {
  NetworkCase net = load_case(args.case_path);
  if (!args.monitored.empty()) net.monitored_lines = args.monitored;
  return net;
}

RiskConfig make_risk(const CommonArgs& args) {
  RiskConfig risk;
  risk.alpha = args.alpha;
  risk.rho = args.rho;
  risk.epsilon = args.epsilon;
  risk.norm = parse_norm(args.ground_norm);
  validate_risk(risk);
  return risk;
}

Dataset load_training_data(const CommonArgs& args, const HorizonModel& model) {
  Matrix samples = load_error_csv(args.data_path);
  if (samples.cols() != model.xi_dim()) {
    std::ostringstream msg;
    msg << args.data_path << " has " << samples.cols() << " columns, the case needs "
        << model.xi_dim();
    throw DataError(msg.str());
  }
  Dataset full = make_dataset(samples);
  if (args.train_size > 0 && args.train_size < full.count()) {
    return subsample(full, args.train_size, args.seed);
  }
  return full;
}

/// Seeded disjoint split used by the sweep: train rows come first in a
/// shuffled order, the remainder is the evaluation pool.
std::pair<Dataset, Dataset> split_dataset(const Matrix& samples, int train_size,
                                          std::uint64_t seed) {
  const int n = static_cast<int>(samples.rows());
  if (train_size < 1 || train_size >= n) {
    std::ostringstream msg;
    msg << "train size " << train_size << " must lie in [1, " << n - 1
        << "] to leave evaluation rows";
    throw ParamError(msg.str());
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Matrix train(train_size, samples.cols());
  Matrix eval(n - train_size, samples.cols());
  for (int i = 0; i < train_size; ++i) train.row(i) = samples.row(order[i]);
  for (int i = train_size; i < n; ++i) eval.row(i - train_size) = samples.row(order[i]);
  return {make_dataset(train), make_dataset(eval)};
}

int cmd_validate(const CommonArgs& args) {
  NetworkCase net = load_case_with_overrides(args);
  HorizonModel model = validate_case(net);
  PolicyLayout layout = make_policy_layout(model);
  const auto rows = monitored_rows(model);
  std::cout << "case " << args.case_path << " is valid\n"
            << "  buses: " << model.n_buses << ", lines: " << model.n_lines
            << ", devices: " << net.devices.size()
            << ", injections: " << net.injections.size() << "\n"
            << "  horizon: " << model.T << ", error channels: " << model.n_xi
            << " (stacked dim " << model.xi_dim() << ")\n"
            << "  policy parameters: " << layout.size() << " (" << layout.n_d
            << " feedback, " << layout.n_e << " nominal)\n"
            << "  monitored constraint rows: " << rows.size() << "\n";
  return kExitOk;
}

int cmd_solve(const CommonArgs& args) {
  NetworkCase net = load_case_with_overrides(args);
  HorizonModel model = validate_case(net);
  RiskConfig risk = make_risk(args);
  Dataset train = load_training_data(args, model);

  Solution sol = solve_opf(model, train, risk);
  const std::string out = args.out.empty() ? "solution.json" : args.out;
  save_solution(sol, model, make_manifest(args), out);

  std::cout << "status: " << to_string(sol.status) << "\n";
  if (sol.status == SolveStatus::solved) {
    double worst = 0.0;
    bool any = false;
    for (double v : sol.predicted_cvar) {
      if (std::isfinite(v)) {
        worst = any ? std::max(worst, v) : v;
        any = true;
      }
    }
    std::cout << "objective: " << sol.objective << " (cost " << sol.cost_term
              << ", risk " << sol.dro_term << ")\n";
    if (any) std::cout << "worst predicted tail: " << worst << "\n";
    std::cout << "iterations: " << sol.iterations << "\n";
  }
  std::cout << "wrote " << out << "\n";
  return sol.status == SolveStatus::solved ? kExitOk : kExitSolve;
}

int cmd_sweep(const CommonArgs& args, std::vector<double> rho_grid,
              std::vector<double> eps_grid) {
  NetworkCase net = load_case_with_overrides(args);
  HorizonModel model = validate_case(net);
  RiskConfig risk = make_risk(args);  // validates alpha/rho/epsilon/norm

  Matrix samples = load_error_csv(args.data_path);
  if (samples.cols() != model.xi_dim()) {
    std::ostringstream msg;
    msg << args.data_path << " has " << samples.cols() << " columns, the case needs "
        << model.xi_dim();
    throw DataError(msg.str());
  }
  const int train_size = args.train_size > 0
                             ? args.train_size
                             : std::max(1, static_cast<int>(samples.rows()) / 2);
  auto [train, eval_pool] = split_dataset(samples, train_size, args.seed);
  const int eval_size = args.eval_size > 0
                            ? std::min(args.eval_size, eval_pool.count())
                            : eval_pool.count();

  if (rho_grid.empty()) rho_grid.push_back(args.rho);
  if (eps_grid.empty()) eps_grid.push_back(args.epsilon);

  SweepResult sweep = tradeoff_sweep(model, train, eval_pool, args.alpha, rho_grid,
                                     eps_grid, eval_size, args.seed, risk.norm);

  const std::string prefix = args.out.empty() ? "sweep" : args.out;
  save_sweep(sweep, make_manifest(args), prefix + ".csv", prefix + ".json");

  int solved = 0;
  for (const auto& p : sweep.points) {
    if (p.status == SolveStatus::solved && p.error.empty()) ++solved;
  }
  std::cout << "sweep: " << solved << "/" << sweep.points.size() << " points solved\n"
            << "wrote " << prefix << ".csv and " << prefix << ".json\n";
  if (solved < static_cast<int>(sweep.points.size())) {
    for (const auto& p : sweep.points) {
      if (!p.error.empty()) {
        std::cerr << "point rho=" << p.rho << " eps=" << p.epsilon << ": " << p.error
                  << "\n";
      }
    }
    return kExitSolve;
  }
  return kExitOk;
}

int cmd_eval(const CommonArgs& args, const std::string& policy_path) {
  NetworkCase net = load_case_with_overrides(args);
  HorizonModel model = validate_case(net);
  AffinePolicy policy = load_policy(policy_path, model);

  Matrix samples = load_error_csv(args.data_path);
  Dataset eval_data = make_dataset(samples);
  if (eval_data.dim() != model.xi_dim()) {
    std::ostringstream msg;
    msg << args.data_path << " has " << eval_data.dim() << " columns, the case needs "
        << model.xi_dim();
    throw DataError(msg.str());
  }
  if (args.eval_size > 0 && args.eval_size < eval_data.count()) {
    eval_data = subsample(eval_data, args.eval_size, args.seed);
  }

  EvalReport report = out_of_sample_eval(model, policy, args.alpha, eval_data);
  const std::string out = args.out.empty() ? "eval.json" : args.out;
  save_eval_report(report, make_manifest(args), out);
  std::cout << "samples: " << report.samples << "\n"
            << "mean cost: " << report.mean_cost << "\n"
            << "worst tail average: " << report.worst_cvar << "\n"
            << "wrote " << out << "\n";
  return kExitOk;
}

int cmd_mpc(const CommonArgs& args, int steps, const std::string& disturbance_path) {
  MpcConfig config;
  config.base = load_case_with_overrides(args);
  HorizonModel model = validate_case(config.base);  // surface case errors early
  config.risk = make_risk(args);
  config.steps = steps;

  Matrix samples = load_error_csv(args.data_path);
  if (samples.cols() != model.xi_dim()) {
    std::ostringstream msg;
    msg << args.data_path << " has " << samples.cols() << " columns, the case needs "
        << model.xi_dim();
    throw DataError(msg.str());
  }
  Dataset full = make_dataset(samples);
  config.train = (args.train_size > 0 && args.train_size < full.count())
                     ? subsample(full, args.train_size, args.seed)
                     : full;
  if (!disturbance_path.empty()) {
    config.disturbances = load_error_csv(disturbance_path);
  }

  MpcTrace trace = mpc_run(config);
  const std::string prefix = args.out.empty() ? "trace" : args.out;
  save_trace(trace, config.base, make_manifest(args), prefix + ".csv", prefix + ".json");
  std::cout << "steps completed: " << trace.steps.size() << "/" << config.steps << "\n";
  if (!trace.error.empty()) std::cerr << trace.error << "\n";
  std::cout << "wrote " << prefix << ".csv and " << prefix << ".json\n";
  return trace.completed ? kExitOk : kExitSolve;
}

struct SynthArgs {
  int count = 1000;
  int dim = 1;
  int horizon = 1;
  double sigma = 1.0;
  double wide_weight = 0.3;
  double wide_scale_ratio = 5.0;
  double time_corr = 0.0;
  std::uint64_t seed = 1;
  std::string out = "errors.csv";
  std::string from_series;
};

int cmd_synth(const SynthArgs& args) {
  Matrix samples;
  if (!args.from_series.empty()) {
    samples = persistence_errors(load_error_csv(args.from_series));
  } else {
    SynthConfig config;
    config.count = args.count;
    config.dim = args.dim;
    config.horizon = args.horizon;
    config.sigma = args.sigma;
    config.wide_weight = args.wide_weight;
    config.wide_scale_ratio = args.wide_scale_ratio;
    config.time_corr = args.time_corr;
    config.seed = args.seed;
    samples = synth_errors(config);
  }
  save_error_csv(samples, args.out);
  std::cout << "wrote " << samples.rows() << " x " << samples.cols() << " samples to "
            << args.out << "\n";
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_data) {
  cmd->add_option("--case", args.case_path, "network case JSON")->required();
  auto* data = cmd->add_option("--data", args.data_path, "forecast error CSV");
  if (needs_data) data->required();
  cmd->add_option("--alpha", args.alpha, "CVaR tail level");
  cmd->add_option("--rho", args.rho, "risk term weight");
  cmd->add_option("--epsilon", args.epsilon, "ambiguity radius");
  cmd->add_option("--train-size", args.train_size, "training rows (0 = all)");
  cmd->add_option("--eval-size", args.eval_size, "evaluation rows (0 = all)");
  cmd->add_option("--seed", args.seed, "subsampling seed");
  cmd->add_option("--out", args.out, "output path (or prefix)");
  cmd->add_option("--ground-norm", args.ground_norm, "transport ground norm: l1 or linf");
  cmd->add_option("--monitored-lines", args.monitored, "override monitored lines (from-to)")
      ->delimiter(',');
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"data-driven distributionally robust optimal power flow"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dropf::kVersion));

  CommonArgs args;
  SynthArgs synth_args;
  std::vector<double> rho_grid;
  std::vector<double> eps_grid;
  std::string policy_path;
  std::string disturbance_path;
  int mpc_steps = 1;

  CLI::App* validate = app.add_subcommand("validate", "check a case file");
  validate->add_option("--case", args.case_path, "network case JSON")->required();
  validate->add_option("--monitored-lines", args.monitored, "override monitored lines")
      ->delimiter(',');

  CLI::App* solve = app.add_subcommand("solve", "solve one instance");
  add_common(solve, args, true);

  CLI::App* sweep = app.add_subcommand("sweep", "trade-off curves over (rho, epsilon)");
  add_common(sweep, args, true);
  sweep->add_option("--rho-grid", rho_grid, "comma-separated rho values")->delimiter(',');
  sweep->add_option("--eps-grid", eps_grid, "comma-separated epsilon values")
      ->delimiter(',');

  CLI::App* eval = app.add_subcommand("eval", "out-of-sample evaluation of a policy");
  add_common(eval, args, true);
  eval->add_option("--policy", policy_path, "policy JSON to evaluate")->required();

  CLI::App* mpc = app.add_subcommand("mpc", "receding-horizon closed loop");
  add_common(mpc, args, true);
  mpc->add_option("--steps", mpc_steps, "number of closed-loop steps")->required();
  mpc->add_option("--disturbances", disturbance_path, "realized error CSV (steps x n_xi)");

  CLI::App* synth = app.add_subcommand("synth", "generate synthetic forecast errors");
  synth->add_option("--count", synth_args.count, "number of samples");
  synth->add_option("--dim", synth_args.dim, "error channels per step");
  synth->add_option("--horizon", synth_args.horizon, "stacked steps per sample");
  synth->add_option("--sigma", synth_args.sigma, "marginal standard deviation");
  synth->add_option("--wide-weight", synth_args.wide_weight, "heavy component weight");
  synth->add_option("--wide-scale-ratio", synth_args.wide_scale_ratio,
                    "heavy component scale ratio");
  synth->add_option("--time-corr", synth_args.time_corr, "AR(1) coefficient across steps");
  synth->add_option("--seed", synth_args.seed, "generator seed");
  synth->add_option("--out", synth_args.out, "output CSV path");
  synth->add_option("--from-series", synth_args.from_series,
                    "derive persistence-forecast errors from a measured series CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (validate->parsed()) return cmd_validate(args);
    if (solve->parsed()) return cmd_solve(args);
    if (sweep->parsed()) return cmd_sweep(args, rho_grid, eps_grid);
    if (eval->parsed()) return cmd_eval(args, policy_path);
    if (mpc->parsed()) return cmd_mpc(args, mpc_steps, disturbance_path);
    if (synth->parsed()) return cmd_synth(synth_args);
  } catch (const SolveError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitSolve;
  } catch (const ValidationError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitValidation;
  } catch (const DataError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitValidation;
  } catch (const ParamError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& ex) {
    std::cerr << "internal error: " << ex.what() << "\n";
    return 1;
  }
  return kExitValidation;
}

}  // namespace dropf_cli
