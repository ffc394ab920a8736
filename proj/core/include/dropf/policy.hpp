#pragma once

#include <vector>

#include "dropf/horizon.hpp"

namespace dropf {

using BoolMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Causal affine reserve policy u_j = D_j xi + e_j per device.
/// Entries of D outside the causal mask are exactly zero.
struct AffinePolicy {
  std::vector<Matrix> D;  // per device, (m T) x (n_xi T)
  std::vector<Vector> e;  // per device, m T
};

/// One free scalar coordinate of a policy matrix D.
struct FreeEntry {
  int row = 0;  // row in D (input coordinate, time-major)
  int col = 0;  // column in D (error coordinate, time-major)
};

/// Mask of policy entries that may be nonzero: block (t, s) is free for
/// s < t, or s <= t when inputs may react to same-step errors.
BoolMask causality_mask(int m, int T, int n_xi, bool same_step_recourse = false);

/// Free entries of the mask in deterministic (block-row, block-col, row, col) order.
std::vector<FreeEntry> free_entries(int m, int T, int n_xi, bool same_step_recourse);

/// Layout of the policy decision vector: all free D entries device-major,
/// then all e entries device-major. Shared by the balance system, the cost
/// expansion, and the QP assembly.
struct PolicyLayout {
  int T = 1;
  int n_xi = 1;
  bool same_step = false;
  std::vector<int> input_dim;                // m_j per device
  std::vector<std::vector<FreeEntry>> free;  // per device
  std::vector<int> d_offset;                 // offset of device j's D entries
  std::vector<int> e_offset;                 // offset of device j's e entries
  int n_d = 0;
  int n_e = 0;

  int size() const { return n_d + n_e; }
  AffinePolicy unpack(const Vector& z) const;
  Vector pack(const AffinePolicy& policy) const;
};

PolicyLayout make_policy_layout(const HorizonModel& model);

/// Linear equality system over the policy vector enforcing power balance
/// for every error realization. Rows with no free coefficient and zero
/// right-hand side are dropped; rows with no free coefficient but nonzero
/// right-hand side raise StructuralInfeasibility.
struct BalanceSystem {
  SpMat A;   // rows x layout.size()
  Vector b;
  int rows_total = 0;    // before dropping trivial rows
  int rows_dropped = 0;  // trivially satisfied rows removed
};

BalanceSystem balance_constraints(const HorizonModel& model, const PolicyLayout& layout);

}  // namespace dropf
