#include "dropf/assembler.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace dropf {

void validate_risk(const RiskConfig& risk) {
  if (!(risk.alpha > 0.0 && risk.alpha <= 1.0)) {
    std::ostringstream msg;
    msg << "alpha must lie in (0, 1], got " << risk.alpha;
    throw ParamError(msg.str());
  }
  if (!(risk.rho >= 0.0) || !std::isfinite(risk.rho)) {
    std::ostringstream msg;
    msg << "rho must be finite and >= 0, got " << risk.rho;
    throw ParamError(msg.str());
  }
  if (!(risk.epsilon >= 0.0) || !std::isfinite(risk.epsilon)) {
    std::ostringstream msg;
    msg << "epsilon must be finite and >= 0, got " << risk.epsilon;
    throw ParamError(msg.str());
  }
}

double QuadraticForm::value(const Vector& z) const {
  return 0.5 * z.dot(P * z) + q.dot(z) + c;
}

QuadraticForm expected_cost(const HorizonModel& model, const PolicyLayout& layout,
                            const Dataset& data) {
  if (data.dim() != model.xi_dim()) {
    std::ostringstream msg;
    msg << "dataset dimension " << data.dim() << " does not match the model's "
        << model.xi_dim();
    throw ParamError(msg.str());
  }
  const int n_dev = static_cast<int>(model.net.devices.size());
  const int N = data.count();

  Vector mu = data.samples.colwise().mean().transpose();
  Matrix second = data.samples.transpose() * data.samples / N;

  std::vector<Triplet> trips;
  Vector q = Vector::Zero(layout.size());
  double c = 0.0;

  for (int j = 0; j < n_dev; ++j) {
    const auto& dev = model.net.devices[j];
    const auto& B = model.devices[j].B_stack;
    Vector ax0 = model.devices[j].A_stack * dev.x0;
    Matrix Q = B.transpose() * dev.cost.H_x * B + dev.cost.H_u;
    Vector g = B.transpose() * (dev.cost.f_x + dev.cost.H_x * ax0) + dev.cost.f_u;
    c += dev.cost.f_x.dot(ax0) + 0.5 * ax0.dot(dev.cost.H_x * ax0) + dev.cost.c;

    const auto& free = layout.free[j];
    const int na = static_cast<int>(free.size());
    const int mt = dev.m * model.T;
    // D-D block: Hessian entry Q(rA, rB) * S(cA, cB)
    for (int a = 0; a < na; ++a) {
      for (int b = 0; b < na; ++b) {
        double v = Q(free[a].row, free[b].row) * second(free[a].col, free[b].col);
        if (v != 0.0) trips.emplace_back(layout.d_offset[j] + a, layout.d_offset[j] + b, v);
      }
    }
    // D-e cross block
    for (int a = 0; a < na; ++a) {
      for (int r = 0; r < mt; ++r) {
        double v = Q(free[a].row, r) * mu(free[a].col);
        if (v != 0.0) {
          trips.emplace_back(layout.d_offset[j] + a, layout.e_offset[j] + r, v);
          trips.emplace_back(layout.e_offset[j] + r, layout.d_offset[j] + a, v);
        }
      }
    }
    // e-e block
    for (int r = 0; r < mt; ++r) {
      for (int rr = 0; rr < mt; ++rr) {
        if (Q(r, rr) != 0.0) {
          trips.emplace_back(layout.e_offset[j] + r, layout.e_offset[j] + rr, Q(r, rr));
        }
      }
    }
    for (int a = 0; a < na; ++a) q(layout.d_offset[j] + a) += g(free[a].row) * mu(free[a].col);
    for (int r = 0; r < mt; ++r) q(layout.e_offset[j] + r) += g(r);
  }

  QuadraticForm form;
  form.P.resize(layout.size(), layout.size());
  form.P.setFromTriplets(trips.begin(), trips.end());
  form.q = std::move(q);
  form.c = c;
  return form;
}

AffineExpr line_loss_coeffs(const HorizonModel& model, const PolicyLayout& layout,
                            int flow_row, int n_y) {
  if (flow_row < 0 || flow_row >= model.flow_rows()) {
    throw ParamError("flow row index is out of range");
  }
  const int xi = model.xi_dim();
  AffineExpr expr;
  expr.a0 = Vector::Zero(xi);
  expr.b0 = -model.p_bar(flow_row);
  std::vector<Triplet> a_trips;
  std::vector<Triplet> b_trips;

  for (size_t j = 0; j < model.devices.size(); ++j) {
    Eigen::RowVectorXd grow = model.devices[j].Gamma.row(flow_row);  // 1 x T
    if (grow.cwiseAbs().maxCoeff() == 0.0) continue;
    Eigen::RowVectorXd w = grow * model.devices[j].CB;  // 1 x mT
    for (size_t a = 0; a < layout.free[j].size(); ++a) {
      const FreeEntry& fe = layout.free[j][a];
      double v = w(fe.row);
      if (v != 0.0) {
        a_trips.emplace_back(fe.col, layout.d_offset[j] + static_cast<int>(a), v);
      }
    }
    for (int r = 0; r < w.size(); ++r) {
      if (w(r) != 0.0) b_trips.emplace_back(0, layout.e_offset[j] + r, w(r));
    }
    expr.b0 += grow.dot(model.devices[j].CAx0);
  }
  for (size_t q = 0; q < model.injections.size(); ++q) {
    Eigen::RowVectorXd grow = model.injections[q].Gamma.row(flow_row);
    if (grow.cwiseAbs().maxCoeff() == 0.0) continue;
    expr.a0 += (grow * model.net.injections[q].G).transpose();
    expr.b0 += grow.dot(model.net.injections[q].r);
  }
  expr.A.resize(xi, n_y);
  expr.A.setFromTriplets(a_trips.begin(), a_trips.end());
  expr.beta.resize(1, n_y);
  expr.beta.setFromTriplets(b_trips.begin(), b_trips.end());
  return expr;
}

AffineExpr device_loss_coeffs(const HorizonModel& model, const PolicyLayout& layout,
                              int device, int local_row, int n_y) {
  if (device < 0 || device >= static_cast<int>(model.net.devices.size())) {
    throw ParamError("device index is out of range");
  }
  const auto& dev = model.net.devices[device];
  if (local_row < 0 || local_row >= dev.local.rows()) {
    throw ParamError("local constraint row is out of range");
  }
  const int xi = model.xi_dim();
  Eigen::RowVectorXd m_row = dev.local.T_loc.row(local_row) * model.devices[device].B_stack +
                             dev.local.U_loc.row(local_row);
  AffineExpr expr;
  expr.a0 = dev.local.Z_loc.row(local_row).transpose();
  expr.b0 = dev.local.T_loc.row(local_row).dot(model.devices[device].A_stack * dev.x0) -
            dev.local.w(local_row);
  std::vector<Triplet> a_trips;
  std::vector<Triplet> b_trips;
  for (size_t a = 0; a < layout.free[device].size(); ++a) {
    const FreeEntry& fe = layout.free[device][a];
    double v = m_row(fe.row);
    if (v != 0.0) {
      a_trips.emplace_back(fe.col, layout.d_offset[device] + static_cast<int>(a), v);
    }
  }
  for (int r = 0; r < m_row.size(); ++r) {
    if (m_row(r) != 0.0) b_trips.emplace_back(0, layout.e_offset[device] + r, m_row(r));
  }
  expr.A.resize(xi, n_y);
  expr.A.setFromTriplets(a_trips.begin(), a_trips.end());
  expr.beta.resize(1, n_y);
  expr.beta.setFromTriplets(b_trips.begin(), b_trips.end());
  return expr;
}

std::vector<MonitoredRow> monitored_rows(const HorizonModel& model) {
  std::vector<MonitoredRow> rows;
  for (int l : model.monitored) {
    const auto& line = model.net.lines[l];
    for (int dir = 0; dir < 2; ++dir) {
      for (int t = 0; t < model.T; ++t) {
        MonitoredRow row;
        row.is_line = true;
        row.flow_row = model.flow_row(l, dir, t);
        std::ostringstream label;
        label << "flow " << line.from << "-" << line.to << (dir == 0 ? " fwd" : " rev")
              << " t" << t;
        row.label = label.str();
        rows.push_back(std::move(row));
      }
    }
  }
  for (size_t j = 0; j < model.net.devices.size(); ++j) {
    for (int q = 0; q < model.net.devices[j].local.rows(); ++q) {
      MonitoredRow row;
      row.device = static_cast<int>(j);
      row.local_row = q;
      std::ostringstream label;
      label << "device " << model.net.devices[j].id << " row " << q;
      row.label = label.str();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

DroQp assemble(const HorizonModel& model, const PolicyLayout& layout,
               const Dataset& data, const RiskConfig& risk) {
  validate_risk(risk);
  if (data.count() == 0) throw DataError("cannot assemble with an empty dataset");
  if (data.dim() != model.xi_dim()) {
    std::ostringstream msg;
    msg << "dataset dimension " << data.dim() << " does not match the model's "
        << model.xi_dim();
    throw ParamError(msg.str());
  }

  const auto rows = monitored_rows(model);
  const int V = static_cast<int>(rows.size());
  const int n0 = layout.size() + V;

  QpBuilder builder(n0);
  QpIndex index;
  for (size_t j = 0; j < layout.free.size(); ++j) {
    index.d.push_back({layout.d_offset[j],
                       layout.d_offset[j] + static_cast<int>(layout.free[j].size())});
    index.e.push_back({layout.e_offset[j],
                       layout.e_offset[j] + layout.input_dim[j] * layout.T});
  }
  index.tau = {layout.size(), layout.size() + V};

  QuadraticForm cost = expected_cost(model, layout, data);
  for (int k = 0; k < cost.P.outerSize(); ++k) {
    for (SpMat::InnerIterator it(cost.P, k); it; ++it) {
      builder.add_obj_quad(static_cast<int>(it.row()), static_cast<int>(it.col()),
                           it.value());
    }
  }
  for (int i = 0; i < cost.q.size(); ++i) {
    if (cost.q(i) != 0.0) builder.add_obj_lin(i, cost.q(i));
  }
  builder.add_obj_const(cost.c);

  BalanceSystem balance = balance_constraints(model, layout);
  for (int r = 0; r < balance.A.rows(); ++r) builder.new_eq_row(balance.b(r));
  for (int k = 0; k < balance.A.outerSize(); ++k) {
    for (SpMat::InnerIterator it(balance.A, k); it; ++it) {
      builder.eq_coeff(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }

  AmbiguitySet ambiguity;
  ambiguity.epsilon = risk.epsilon;
  ambiguity.norm = risk.norm;
  ambiguity.support_H = data.support_H;
  ambiguity.support_d = data.support_d;

  for (int v = 0; v < V; ++v) {
    // earlier epigraph blocks appended their own variables, so each row's
    // coefficients must span the builder's width as of this iteration
    const int width = builder.n_vars();
    AffineExpr g = rows[v].is_line
                       ? line_loss_coeffs(model, layout, rows[v].flow_row, width)
                       : device_loss_coeffs(model, layout, rows[v].device,
                                            rows[v].local_row, width);
    MaxAffineLoss loss = cvar_pieces(g, risk.alpha, index.tau.begin + v);
    EpigraphBlock block = dro_epigraph(builder, loss, data, ambiguity, risk.rho);
    index.lambda.push_back(block.lambda);
    index.s.push_back(block.s);
    index.gamma.push_back(block.gamma);
    index.aux.push_back(block.aux);
  }

  return builder.take(std::move(index));
}

Solution solve_opf(const HorizonModel& model, const Dataset& data, const RiskConfig& risk,
                   const QpSettings& settings) {
  PolicyLayout layout = make_policy_layout(model);
  DroQp qp = assemble(model, layout, data, risk);
  QpResult result = solve_qp(qp, settings);

  Solution sol;
  sol.status = result.status;
  sol.iterations = result.iterations;
  sol.kkt = result.kkt;
  sol.z = result.z;

  const auto rows = monitored_rows(model);
  for (const auto& row : rows) sol.row_labels.push_back(row.label);

  if (result.z.size() >= layout.size()) {
    sol.policy = layout.unpack(result.z);
    const int V = static_cast<int>(rows.size());
    sol.tau = result.z.segment(qp.index.tau.begin, V);
    QuadraticForm cost = expected_cost(model, layout, data);
    sol.cost_term = cost.value(result.z.head(layout.size()));
    sol.objective = result.objective;
    const int N = data.count();
    for (int v = 0; v < V; ++v) {
      double lam = result.z(qp.index.lambda[v]);
      double mean_s = result.z.segment(qp.index.s[v].begin, N).mean();
      double term = lam * risk.epsilon + mean_s;
      sol.dro_term_per_row.push_back(term);
      sol.dro_term += term;
      sol.predicted_cvar.push_back(
          risk.rho > 0.0 ? term / (risk.rho * risk.alpha)
                         : std::numeric_limits<double>::quiet_NaN());
    }
  }
  return sol;
}

}  // namespace dropf
