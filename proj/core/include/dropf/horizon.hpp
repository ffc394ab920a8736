#pragma once

#include <utility>
#include <vector>

#include "dropf/network.hpp"

namespace dropf {

/// Horizon-stacked matrices for one controllable device.
struct DeviceHorizon {
  Matrix A_stack;  // nT x n,  row block t is A_step^{t+1}
  Matrix B_stack;  // nT x mT, block lower-triangular
  Matrix C_sel;    // T x nT,  selects the injection coordinate of each x_t
  Matrix Gamma;    // 2LT x T, line mapping of the device's injections
  Matrix CB;       // T x mT,  cached C_sel * B_stack
  Vector CAx0;     // T,       cached C_sel * A_stack * x0
};

struct InjectionHorizon {
  Matrix Gamma;  // 2LT x T
};

/// Immutable product of case validation. Safe to share across solves.
struct HorizonModel {
  NetworkCase net;
  int T = 1;
  int n_xi = 1;
  int n_lines = 0;
  int n_buses = 0;

  std::vector<DeviceHorizon> devices;
  std::vector<InjectionHorizon> injections;

  Matrix ptdf;    // L x n_buses, flow sensitivity in from->to orientation
  Vector p_bar;   // 2LT directed line-time limits
  std::vector<int> monitored;  // monitored line indices, sorted and unique

  int xi_dim() const { return n_xi * T; }
  int flow_rows() const { return 2 * n_lines * T; }
  /// Row index of (line l, direction d in {0: from->to, 1: to->from}, time t).
  int flow_row(int line, int dir, int t) const { return (2 * line + dir) * T + t; }
  int bus_index(int bus_id) const;
};

/// Stacked dynamics (A_stack, B_stack) of x = A_stack x0 + B_stack u.
std::pair<Matrix, Matrix> stack_dynamics(const ControllableDevice& device, int T);

/// DC power transfer distribution factors, L x n_buses in from->to orientation.
/// Column b gives line flows for 1 MW injected at bus b and withdrawn at the slack.
Matrix build_ptdf(const NetworkCase& net);

/// 2LT x T line mapping for an entity injecting at the given bus index.
Matrix line_mapping(const Matrix& ptdf, int bus_index, int T);

/// Checks every case invariant and builds all stacked matrices.
HorizonModel validate_case(const NetworkCase& net);

}  // namespace dropf
