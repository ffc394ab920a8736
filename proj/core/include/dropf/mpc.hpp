#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dropf/evaluation.hpp"

namespace dropf {

struct MpcState {
  std::vector<Vector> x;               // per device
  std::vector<double> last_injection;  // per uncontrollable injection
};

/// Window forecasts for step t. The default (when the config holds no
/// provider) is persistence: every future value equals the last realized one.
using ForecastProvider = std::function<std::vector<UncontrollableInjection>(
    int step, const MpcState& state, const NetworkCase& base)>;

/// Receding-horizon loop configuration. base.T is the window length; each
/// step re-solves the window problem from the measured state and applies
/// only the first input block. Training data and risk stay fixed per run.
struct MpcConfig {
  NetworkCase base;
  Dataset train;
  RiskConfig risk;
  QpSettings qp;
  int steps = 1;
  Matrix disturbances;  // steps x n_xi realized errors; 0 rows means no noise
  ForecastProvider forecast;
};

MpcState initial_state(const NetworkCase& base);

struct MpcStepRecord {
  int step = 0;
  SolveStatus status = SolveStatus::max_iterations;
  double objective = 0.0;
  std::vector<Vector> u;     // applied first-block input per device
  std::vector<Vector> x;     // state after the step per device
  Vector realized_injections;  // per uncontrollable injection at this step
  Vector constraint_values;  // monitored line rows at window time 0, realized
  double stage_cost = 0.0;   // first-step diagonal blocks of the device costs
};

struct MpcTrace {
  std::vector<MpcStepRecord> steps;
  bool completed = false;
  std::string error;  // set when the loop stopped early
};

/// One receding-horizon step: build the window problem at time t from the
/// measured state, solve it, apply the first input block under the realized
/// error, and advance the state. The full window solution is returned too.
std::pair<MpcStepRecord, Solution> mpc_step(const MpcConfig& config, const MpcState& state,
                                            int t, const Vector& xi_realized);

/// Runs the loop for config.steps steps and advances the state between
/// them. A failed step stops the loop; the trace keeps all earlier steps.
MpcTrace mpc_run(const MpcConfig& config);

}  // namespace dropf
