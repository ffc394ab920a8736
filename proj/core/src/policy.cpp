#include "dropf/policy.hpp"

#include <sstream>

namespace dropf {

BoolMask causality_mask(int m, int T, int n_xi, bool same_step_recourse) {
  if (m < 1 || T < 1 || n_xi < 1) {
    throw ParamError("causality mask needs positive m, T and n_xi");
  }
  BoolMask mask = BoolMask::Constant(m * T, n_xi * T, false);
  for (int t = 0; t < T; ++t) {
    int last = same_step_recourse ? t : t - 1;
    for (int s = 0; s <= last; ++s) {
      mask.block(t * m, s * n_xi, m, n_xi).setConstant(true);
    }
  }
  return mask;
}

std::vector<FreeEntry> free_entries(int m, int T, int n_xi, bool same_step_recourse) {
  std::vector<FreeEntry> entries;
  for (int t = 0; t < T; ++t) {
    int last = same_step_recourse ? t : t - 1;
    for (int s = 0; s <= last; ++s) {
      for (int r = 0; r < m; ++r) {
        for (int c = 0; c < n_xi; ++c) {
          entries.push_back({t * m + r, s * n_xi + c});
        }
      }
    }
  }
  return entries;
}

PolicyLayout make_policy_layout(const HorizonModel& model) {
  PolicyLayout layout;
  layout.T = model.T;
  layout.n_xi = model.n_xi;
  layout.same_step = model.net.same_step_recourse;
  int offset = 0;
  for (const auto& dev : model.net.devices) {
    layout.input_dim.push_back(dev.m);
    layout.free.push_back(free_entries(dev.m, model.T, model.n_xi, layout.same_step));
    layout.d_offset.push_back(offset);
    offset += static_cast<int>(layout.free.back().size());
  }
  layout.n_d = offset;
  for (size_t j = 0; j < model.net.devices.size(); ++j) {
    layout.e_offset.push_back(offset);
    offset += layout.input_dim[j] * model.T;
  }
  layout.n_e = offset - layout.n_d;
  return layout;
}

AffinePolicy PolicyLayout::unpack(const Vector& z) const {
  if (z.size() < size()) {
    throw ParamError("policy vector is shorter than the layout");
  }
  AffinePolicy policy;
  const int xi = n_xi * T;
  for (size_t j = 0; j < free.size(); ++j) {
    Matrix d = Matrix::Zero(input_dim[j] * T, xi);
    for (size_t a = 0; a < free[j].size(); ++a) {
      d(free[j][a].row, free[j][a].col) = z(d_offset[j] + static_cast<int>(a));
    }
    policy.D.push_back(std::move(d));
    policy.e.push_back(z.segment(e_offset[j], input_dim[j] * T));
  }
  return policy;
}

Vector PolicyLayout::pack(const AffinePolicy& policy) const {
  if (policy.D.size() != free.size() || policy.e.size() != free.size()) {
    throw ParamError("policy has a different device count than the layout");
  }
  Vector z = Vector::Zero(size());
  for (size_t j = 0; j < free.size(); ++j) {
    for (size_t a = 0; a < free[j].size(); ++a) {
      z(d_offset[j] + static_cast<int>(a)) = policy.D[j](free[j][a].row, free[j][a].col);
    }
    z.segment(e_offset[j], input_dim[j] * T) = policy.e[j];
  }
  return z;
}

BalanceSystem balance_constraints(const HorizonModel& model, const PolicyLayout& layout) {
  const int T = model.T;
  const int xi = model.xi_dim();
  const int n_dev = static_cast<int>(model.devices.size());

  // Row layout before dropping: T constant rows, then T*xi slope rows
  // (time-major, then error coordinate).
  const int rows_total = T + T * xi;
  Matrix coeff = Matrix::Zero(rows_total, layout.size());
  Vector rhs = Vector::Zero(rows_total);

  for (int j = 0; j < n_dev; ++j) {
    const auto& CB = model.devices[j].CB;  // T x mT
    for (int t = 0; t < T; ++t) {
      // constant row t: sum_j (CAx0_j + CB_j e_j)[t] + sum_inj r[t] = 0
      rhs(t) -= model.devices[j].CAx0(t);
      for (int col = 0; col < CB.cols(); ++col) {
        double v = CB(t, col);
        if (v != 0.0) coeff(t, layout.e_offset[j] + col) += v;
      }
      // slope rows (t, c): sum_j (CB_j D_j)[t, c] + sum_inj G[t, c] = 0
      for (size_t a = 0; a < layout.free[j].size(); ++a) {
        const FreeEntry& fe = layout.free[j][a];
        double v = CB(t, fe.row);
        if (v != 0.0) {
          coeff(T + t * xi + fe.col, layout.d_offset[j] + static_cast<int>(a)) += v;
        }
      }
    }
  }
  for (size_t q = 0; q < model.net.injections.size(); ++q) {
    const auto& inj = model.net.injections[q];
    for (int t = 0; t < T; ++t) {
      rhs(t) -= inj.r(t);
      for (int c = 0; c < xi; ++c) {
        rhs(T + t * xi + c) -= inj.G(t, c);
      }
    }
  }

  // classify rows: keep rows with any coefficient; a coefficient-free row
  // with nonzero right-hand side cannot be satisfied by any policy
  std::vector<int> keep;
  std::vector<int> dead;
  int dropped = 0;
  for (int r = 0; r < rows_total; ++r) {
    bool has_coeff = false;
    for (int c = 0; c < layout.size(); ++c) {
      if (coeff(r, c) != 0.0) {
        has_coeff = true;
        break;
      }
    }
    if (has_coeff) {
      keep.push_back(r);
    } else if (std::abs(rhs(r)) > 1e-12) {
      dead.push_back(r);
    } else {
      ++dropped;
    }
  }
  if (!dead.empty()) {
    std::ostringstream msg;
    msg << dead.size() << " balance row(s) have no policy coefficient but a nonzero "
        << "imbalance; first: ";
    int r = dead.front();
    if (r < T) {
      msg << "net constant injection at step " << r;
    } else {
      int t = (r - T) / xi;
      int c = (r - T) % xi;
      msg << "error coordinate " << c % model.n_xi << " of step " << c / model.n_xi
          << " cannot be compensated at step " << t
          << " (no device input reaches it under the causality mask)";
    }
    throw StructuralInfeasibility(msg.str());
  }

  BalanceSystem sys;
  sys.rows_total = rows_total;
  sys.rows_dropped = dropped;
  sys.b = Vector::Zero(static_cast<int>(keep.size()));
  std::vector<Triplet> trips;
  for (size_t i = 0; i < keep.size(); ++i) {
    int r = keep[i];
    sys.b(static_cast<int>(i)) = rhs(r);
    for (int c = 0; c < layout.size(); ++c) {
      if (coeff(r, c) != 0.0) {
        trips.emplace_back(static_cast<int>(i), c, coeff(r, c));
      }
    }
  }
  sys.A.resize(static_cast<int>(keep.size()), layout.size());
  sys.A.setFromTriplets(trips.begin(), trips.end());
  return sys;
}

}  // namespace dropf
