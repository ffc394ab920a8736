#pragma once

#include <string>
#include <vector>

#include "dropf/types.hpp"

namespace dropf {

/// Convex quadratic stage cost over the stacked horizon,
/// J = f_x'x + x'H_x x/2 + f_u'u + u'H_u u/2 + c.
struct DeviceCost {
  Vector f_x;  // nT
  Matrix H_x;  // nT x nT, PSD
  Vector f_u;  // mT
  Matrix H_u;  // mT x mT, PSD
  double c = 0.0;
};

/// Linear local constraints T x + U u + Z xi <= w over the stacked horizon.
struct LocalConstraints {
  Matrix T_loc;  // l x nT
  Matrix U_loc;  // l x mT
  Matrix Z_loc;  // l x (n_xi*T)
  Vector w;      // l
  int rows() const { return static_cast<int>(w.size()); }
};

/// Device with controllable power flow: x_{t+1} = A_step x_t + B_step u_t.
/// By convention the first state coordinate is the bus power injection.
struct ControllableDevice {
  std::string id;
  int n = 1;
  int m = 1;
  Matrix A_step;  // n x n
  Matrix B_step;  // n x m
  Vector x0;      // n
  int bus = 0;
  DeviceCost cost;
  LocalConstraints local;
};

/// Device with fixed or uncertain power flow r + G xi.
/// G = 0 means the device carries no modeled uncertainty.
struct UncontrollableInjection {
  std::string id;
  int bus = 0;
  Vector r;  // T
  Matrix G;  // T x (n_xi*T)
};

struct Line {
  int from = 0;
  int to = 0;
  double x_pu = 0.0;
  double limit_mw = 0.0;
  double limit_rev_mw = -1.0;  // < 0: symmetric, use limit_mw for both directions
};

struct NetworkCase {
  std::vector<int> buses;
  int slack = 0;
  std::vector<Line> lines;
  std::vector<ControllableDevice> devices;
  std::vector<UncontrollableInjection> injections;
  int T = 1;
  int n_xi = 1;
  std::vector<std::string> monitored_lines;  // "from-to" keys; empty: all lines
  bool same_step_recourse = false;
};

}  // namespace dropf
