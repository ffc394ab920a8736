#include "dropf/mpc.hpp"

#include <sstream>

namespace dropf {

namespace {

std::vector<UncontrollableInjection> persistence_forecast(const MpcState& state,
                                                          const NetworkCase& base) {
  std::vector<UncontrollableInjection> out = base.injections;
  for (size_t q = 0; q < out.size(); ++q) {
    out[q].r = Vector::Constant(base.T, state.last_injection[q]);
  }
  return out;
}

void validate_config(const MpcConfig& config) {
  if (config.steps < 1) throw ParamError("MPC needs at least one step");
  if (config.base.T < 1) throw ParamError("MPC window length must be at least 1");
  if (config.disturbances.rows() > 0) {
    if (config.disturbances.cols() != config.base.n_xi) {
      std::ostringstream msg;
      msg << "disturbance width " << config.disturbances.cols()
          << " does not match n_xi = " << config.base.n_xi;
      throw ParamError(msg.str());
    }
    if (config.disturbances.rows() < config.steps) {
      std::ostringstream msg;
      msg << "disturbance table has " << config.disturbances.rows() << " rows for "
          << config.steps << " steps";
      throw ParamError(msg.str());
    }
  }
}

}  // namespace

MpcState initial_state(const NetworkCase& base) {
  MpcState state;
  for (const auto& dev : base.devices) state.x.push_back(dev.x0);
  for (const auto& inj : base.injections) {
    state.last_injection.push_back(inj.r.size() > 0 ? inj.r(0) : 0.0);
  }
  return state;
}

std::pair<MpcStepRecord, Solution> mpc_step(const MpcConfig& config, const MpcState& state,
                                            int t, const Vector& xi_realized) {
  if (xi_realized.size() != config.base.n_xi) {
    std::ostringstream msg;
    msg << "realized error has length " << xi_realized.size() << ", expected "
        << config.base.n_xi;
    throw ParamError(msg.str());
  }
  if (state.x.size() != config.base.devices.size() ||
      state.last_injection.size() != config.base.injections.size()) {
    throw ParamError("state does not match the case's device/injection counts");
  }

  NetworkCase window = config.base;
  for (size_t j = 0; j < window.devices.size(); ++j) window.devices[j].x0 = state.x[j];
  window.injections = config.forecast ? config.forecast(t, state, config.base)
                                      : persistence_forecast(state, config.base);
  if (window.injections.size() != config.base.injections.size()) {
    throw ParamError("forecast provider changed the injection count");
  }

  HorizonModel model = validate_case(window);
  Solution sol = solve_opf(model, config.train, config.risk, config.qp);

  MpcStepRecord record;
  record.step = t;
  record.status = sol.status;
  if (sol.status != SolveStatus::solved) return {record, sol};
  record.objective = sol.objective;

  Vector xi_window = Vector::Zero(model.xi_dim());
  xi_window.head(config.base.n_xi) = xi_realized;

  for (size_t j = 0; j < window.devices.size(); ++j) {
    const auto& dev = window.devices[j];
    Vector u_full = sol.policy.D[j] * xi_window + sol.policy.e[j];
    Vector u = u_full.head(dev.m);
    Vector x_next = dev.A_step * state.x[j] + dev.B_step * u;
    record.u.push_back(u);
    record.x.push_back(x_next);

    const auto& cost = dev.cost;
    Matrix hx0 = cost.H_x.topLeftCorner(dev.n, dev.n);
    Matrix hu0 = cost.H_u.topLeftCorner(dev.m, dev.m);
    record.stage_cost += 0.5 * x_next.dot(hx0 * x_next) + cost.f_x.head(dev.n).dot(x_next) +
                         0.5 * u.dot(hu0 * u) + cost.f_u.head(dev.m).dot(u);
  }

  record.realized_injections = Vector::Zero(static_cast<int>(window.injections.size()));
  for (size_t q = 0; q < window.injections.size(); ++q) {
    record.realized_injections(static_cast<int>(q)) =
        window.injections[q].r(0) +
        window.injections[q].G.row(0).head(config.base.n_xi).dot(xi_realized);
  }

  // realized monitored flows at window time 0
  const auto rows = monitored_rows(model);
  std::vector<double> flows;
  for (const auto& row : rows) {
    if (!row.is_line) continue;
    if (row.flow_row % model.T != 0) continue;  // keep t = 0 rows only
    double flow = 0.0;
    for (size_t j = 0; j < window.devices.size(); ++j) {
      // injection of device j at window time 0 is the first state coordinate
      flow += model.devices[j].Gamma(row.flow_row, 0) * record.x[j](0);
    }
    for (size_t q = 0; q < window.injections.size(); ++q) {
      flow += model.injections[q].Gamma(row.flow_row, 0) *
              record.realized_injections(static_cast<int>(q));
    }
    flows.push_back(flow - model.p_bar(row.flow_row));
  }
  record.constraint_values = Vector::Zero(static_cast<int>(flows.size()));
  for (size_t f = 0; f < flows.size(); ++f) {
    record.constraint_values(static_cast<int>(f)) = flows[f];
  }
  return {record, sol};
}

MpcTrace mpc_run(const MpcConfig& config) {
  validate_config(config);
  MpcTrace trace;
  MpcState state = initial_state(config.base);

  for (int t = 0; t < config.steps; ++t) {
    Vector xi = config.disturbances.rows() > 0
                    ? Vector(config.disturbances.row(t).transpose())
                    : Vector(Vector::Zero(config.base.n_xi));
    try {
      auto [record, sol] = mpc_step(config, state, t, xi);
      if (record.status != SolveStatus::solved) {
        std::ostringstream msg;
        msg << "step " << t << " ended with status " << to_string(record.status);
        trace.error = msg.str();
        trace.steps.push_back(std::move(record));
        return trace;
      }
      state.x = record.x;
      for (size_t q = 0; q < state.last_injection.size(); ++q) {
        state.last_injection[q] = record.realized_injections(static_cast<int>(q));
      }
      trace.steps.push_back(std::move(record));
    } catch (const std::exception& ex) {
      std::ostringstream msg;
      msg << "step " << t << " failed: " << ex.what();
      trace.error = msg.str();
      return trace;
    }
  }
  trace.completed = true;
  return trace;
}

}  // namespace dropf
