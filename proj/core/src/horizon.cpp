#include "dropf/horizon.hpp"

#include <algorithm>
#include <queue>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace dropf {

namespace {

void check_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) {
    throw ValidationError(what + " contains a NaN or infinite entry");
  }
}

void check_finite(const Vector& v, const std::string& what) {
  if (!v.allFinite()) {
    throw ValidationError(what + " contains a NaN or infinite entry");
  }
}

void check_shape(const Matrix& m, int rows, int cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream msg;
    msg << what << " must be " << rows << "x" << cols << ", got " << m.rows() << "x"
        << m.cols();
    throw ValidationError(msg.str());
  }
}

void check_psd(const Matrix& h, const std::string& what) {
  if (h.rows() == 0) return;
  double asym = (h - h.transpose()).cwiseAbs().maxCoeff();
  double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if (asym > 1e-9 * scale) {
    throw ValidationError(what + " must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (h + h.transpose()),
                                            Eigen::EigenvaluesOnly);
  double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < -1e-9 * scale) {
    std::ostringstream msg;
    msg << what << " must be positive semidefinite, smallest eigenvalue " << min_eig;
    throw ValidationError(msg.str());
  }
}

}  // namespace

int HorizonModel::bus_index(int bus_id) const {
  for (int i = 0; i < static_cast<int>(net.buses.size()); ++i) {
    if (net.buses[i] == bus_id) return i;
  }
  std::ostringstream msg;
  msg << "bus " << bus_id << " is not in the case";
  throw ValidationError(msg.str());
}

std::pair<Matrix, Matrix> stack_dynamics(const ControllableDevice& dev, int T) {
  const int n = dev.n;
  const int m = dev.m;
  Matrix a_stack = Matrix::Zero(n * T, n);
  Matrix b_stack = Matrix::Zero(n * T, m * T);

  // powers[t] = A^t
  std::vector<Matrix> powers(T + 1);
  powers[0] = Matrix::Identity(n, n);
  for (int t = 1; t <= T; ++t) powers[t] = dev.A_step * powers[t - 1];

  for (int t = 0; t < T; ++t) {
    a_stack.block(t * n, 0, n, n) = powers[t + 1];
    for (int s = 0; s <= t; ++s) {
      b_stack.block(t * n, s * m, n, m) = powers[t - s] * dev.B_step;
    }
  }
  return {a_stack, b_stack};
}

Matrix build_ptdf(const NetworkCase& net) {
  const int n = static_cast<int>(net.buses.size());
  const int n_lines = static_cast<int>(net.lines.size());

  std::unordered_map<int, int> index;
  for (int i = 0; i < n; ++i) index[net.buses[i]] = i;

  int slack = -1;
  if (auto it = index.find(net.slack); it != index.end()) slack = it->second;
  if (slack < 0) {
    std::ostringstream msg;
    msg << "slack bus " << net.slack << " is not in the bus list";
    throw ValidationError(msg.str());
  }

  // connectivity from the slack over the line graph
  std::vector<std::vector<int>> adj(n);
  for (const auto& line : net.lines) {
    int f = index.at(line.from);
    int t = index.at(line.to);
    adj[f].push_back(t);
    adj[t].push_back(f);
  }
  std::vector<char> seen(n, 0);
  std::queue<int> frontier;
  frontier.push(slack);
  seen[slack] = 1;
  while (!frontier.empty()) {
    int b = frontier.front();
    frontier.pop();
    for (int nb : adj[b]) {
      if (!seen[nb]) {
        seen[nb] = 1;
        frontier.push(nb);
      }
    }
  }
  std::vector<int> unreachable;
  for (int i = 0; i < n; ++i) {
    if (!seen[i]) unreachable.push_back(net.buses[i]);
  }
  if (!unreachable.empty()) {
    std::ostringstream msg;
    msg << "network is not connected: " << unreachable.size()
        << " bus(es) unreachable from the slack, first ";
    for (size_t i = 0; i < std::min<size_t>(unreachable.size(), 5); ++i) {
      if (i) msg << ", ";
      msg << unreachable[i];
    }
    throw ValidationError(msg.str());
  }

  // reduced nodal susceptance (slack row/column removed)
  std::vector<int> red(n, -1);
  {
    int k = 0;
    for (int i = 0; i < n; ++i) {
      if (i != slack) red[i] = k++;
    }
  }
  Matrix b_red = Matrix::Zero(n - 1, n - 1);
  for (const auto& line : net.lines) {
    int f = index.at(line.from);
    int t = index.at(line.to);
    double b = 1.0 / line.x_pu;
    if (red[f] >= 0) b_red(red[f], red[f]) += b;
    if (red[t] >= 0) b_red(red[t], red[t]) += b;
    if (red[f] >= 0 && red[t] >= 0) {
      b_red(red[f], red[t]) -= b;
      b_red(red[t], red[f]) -= b;
    }
  }

  Matrix theta_red;
  if (n > 1) {
    Eigen::LLT<Matrix> llt(b_red);
    if (llt.info() != Eigen::Success) {
      throw ValidationError(
          "reduced susceptance matrix is singular; the network has no usable "
          "flow solution");
    }
    theta_red = llt.solve(Matrix::Identity(n - 1, n - 1));
  }

  // theta(:, j): angles for a unit injection at bus j withdrawn at the slack
  Matrix theta = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    if (j == slack) continue;
    for (int i = 0; i < n; ++i) {
      if (i == slack) continue;
      theta(i, j) = theta_red(red[i], red[j]);
    }
  }

  Matrix ptdf = Matrix::Zero(n_lines, n);
  for (int l = 0; l < n_lines; ++l) {
    int f = index.at(net.lines[l].from);
    int t = index.at(net.lines[l].to);
    double b = 1.0 / net.lines[l].x_pu;
    ptdf.row(l) = b * (theta.row(f) - theta.row(t));
  }
  ptdf.col(slack).setZero();
  return ptdf;
}

Matrix line_mapping(const Matrix& ptdf, int bus_index, int T) {
  const int n_lines = static_cast<int>(ptdf.rows());
  Matrix gamma = Matrix::Zero(2 * n_lines * T, T);
  for (int l = 0; l < n_lines; ++l) {
    double coef = ptdf(l, bus_index);
    for (int t = 0; t < T; ++t) {
      gamma((2 * l) * T + t, t) = coef;
      gamma((2 * l + 1) * T + t, t) = -coef;
    }
  }
  return gamma;
}

HorizonModel validate_case(const NetworkCase& net) {
  if (net.buses.empty()) throw ValidationError("case has no buses");
  {
    std::unordered_set<int> ids;
    for (int b : net.buses) {
      if (!ids.insert(b).second) {
        std::ostringstream msg;
        msg << "duplicate bus id " << b;
        throw ValidationError(msg.str());
      }
    }
  }
  if (net.T < 1) throw ValidationError("horizon T must be at least 1");
  if (net.n_xi < 1) throw ValidationError("n_xi must be at least 1");
  if (net.devices.empty()) {
    throw ValidationError("case needs at least one controllable device");
  }

  std::unordered_set<int> bus_set(net.buses.begin(), net.buses.end());
  for (size_t l = 0; l < net.lines.size(); ++l) {
    const auto& line = net.lines[l];
    std::ostringstream name;
    name << "line " << line.from << "-" << line.to;
    if (!bus_set.count(line.from) || !bus_set.count(line.to)) {
      throw ValidationError(name.str() + " references a bus that is not in the case");
    }
    if (line.from == line.to) {
      throw ValidationError(name.str() + " connects a bus to itself");
    }
    if (!(line.x_pu > 0.0)) {
      std::ostringstream msg;
      msg << name.str() << " has non-positive reactance " << line.x_pu;
      throw ValidationError(msg.str());
    }
    if (!(line.limit_mw > 0.0)) {
      std::ostringstream msg;
      msg << name.str() << " has non-positive limit " << line.limit_mw;
      throw ValidationError(msg.str());
    }
    if (line.limit_rev_mw >= 0.0 && !(line.limit_rev_mw > 0.0)) {
      throw ValidationError(name.str() + " has a zero reverse limit");
    }
  }

  const int T = net.T;
  const int xi_dim = net.n_xi * T;

  HorizonModel model;
  model.net = net;
  model.T = T;
  model.n_xi = net.n_xi;
  model.n_lines = static_cast<int>(net.lines.size());
  model.n_buses = static_cast<int>(net.buses.size());
  model.ptdf = build_ptdf(net);

  std::unordered_map<int, int> bus_pos;
  for (int i = 0; i < model.n_buses; ++i) bus_pos[net.buses[i]] = i;

  for (const auto& dev : net.devices) {
    const std::string what = "device " + dev.id;
    if (dev.n < 1 || dev.m < 1) {
      throw ValidationError(what + " must have positive state and input dimensions");
    }
    if (!bus_set.count(dev.bus)) {
      std::ostringstream msg;
      msg << what << " sits at unknown bus " << dev.bus;
      throw ValidationError(msg.str());
    }
    check_shape(dev.A_step, dev.n, dev.n, what + " A");
    check_shape(dev.B_step, dev.n, dev.m, what + " B");
    if (dev.x0.size() != dev.n) {
      std::ostringstream msg;
      msg << what << " x0 must have length " << dev.n << ", got " << dev.x0.size();
      throw ValidationError(msg.str());
    }
    check_finite(dev.A_step, what + " A");
    check_finite(dev.B_step, what + " B");
    check_finite(dev.x0, what + " x0");

    check_shape(dev.cost.H_x, dev.n * T, dev.n * T, what + " H_x");
    check_shape(dev.cost.H_u, dev.m * T, dev.m * T, what + " H_u");
    if (dev.cost.f_x.size() != dev.n * T || dev.cost.f_u.size() != dev.m * T) {
      throw ValidationError(what + " cost vectors do not match the stacked sizes");
    }
    check_finite(dev.cost.H_x, what + " H_x");
    check_finite(dev.cost.H_u, what + " H_u");
    check_psd(dev.cost.H_x, what + " H_x");
    check_psd(dev.cost.H_u, what + " H_u");

    const int l_rows = dev.local.rows();
    if (l_rows > 0) {
      check_shape(dev.local.T_loc, l_rows, dev.n * T, what + " local T");
      check_shape(dev.local.U_loc, l_rows, dev.m * T, what + " local U");
      check_shape(dev.local.Z_loc, l_rows, xi_dim, what + " local Z");
      check_finite(dev.local.T_loc, what + " local T");
      check_finite(dev.local.U_loc, what + " local U");
      check_finite(dev.local.Z_loc, what + " local Z");
      check_finite(dev.local.w, what + " local bound");
    }

    DeviceHorizon h;
    std::tie(h.A_stack, h.B_stack) = stack_dynamics(dev, T);
    h.C_sel = Matrix::Zero(T, dev.n * T);
    for (int t = 0; t < T; ++t) h.C_sel(t, t * dev.n) = 1.0;
    h.Gamma = line_mapping(model.ptdf, bus_pos.at(dev.bus), T);
    h.CB = h.C_sel * h.B_stack;
    h.CAx0 = h.C_sel * h.A_stack * dev.x0;
    model.devices.push_back(std::move(h));
  }

  for (const auto& inj : net.injections) {
    const std::string what = "injection " + inj.id;
    if (!bus_set.count(inj.bus)) {
      std::ostringstream msg;
      msg << what << " sits at unknown bus " << inj.bus;
      throw ValidationError(msg.str());
    }
    if (inj.r.size() != T) {
      std::ostringstream msg;
      msg << what << " forecast must have length " << T << ", got " << inj.r.size();
      throw ValidationError(msg.str());
    }
    check_shape(inj.G, T, xi_dim, what + " G");
    check_finite(inj.r, what + " forecast");
    check_finite(inj.G, what + " G");
    InjectionHorizon h;
    h.Gamma = line_mapping(model.ptdf, bus_pos.at(inj.bus), T);
    model.injections.push_back(std::move(h));
  }

  // flow bounds per direction
  model.p_bar = Vector::Zero(model.flow_rows());
  for (int l = 0; l < model.n_lines; ++l) {
    const auto& line = net.lines[l];
    double fwd = line.limit_mw;
    double rev = line.limit_rev_mw >= 0.0 ? line.limit_rev_mw : line.limit_mw;
    for (int t = 0; t < T; ++t) {
      model.p_bar(model.flow_row(l, 0, t)) = fwd;
      model.p_bar(model.flow_row(l, 1, t)) = rev;
    }
  }

  // monitored flow rows: all lines unless an explicit list is given
  auto match_line = [&](const std::string& key) -> int {
    auto dash = key.find('-');
    if (dash == std::string::npos) {
      throw ValidationError("monitored line '" + key + "' is not of the form from-to");
    }
    int a = 0, b = 0;
    try {
      a = std::stoi(key.substr(0, dash));
      b = std::stoi(key.substr(dash + 1));
    } catch (const std::exception&) {
      throw ValidationError("monitored line '" + key + "' is not of the form from-to");
    }
    for (int l = 0; l < model.n_lines; ++l) {
      const auto& line = net.lines[l];
      if ((line.from == a && line.to == b) || (line.from == b && line.to == a)) {
        return l;
      }
    }
    throw ValidationError("monitored line '" + key + "' does not match any line");
  };

  if (net.monitored_lines.empty()) {
    for (int l = 0; l < model.n_lines; ++l) model.monitored.push_back(l);
  } else {
    for (const auto& key : net.monitored_lines) {
      model.monitored.push_back(match_line(key));
    }
    std::sort(model.monitored.begin(), model.monitored.end());
    model.monitored.erase(std::unique(model.monitored.begin(), model.monitored.end()),
                          model.monitored.end());
  }

  return model;
}

}  // namespace dropf
