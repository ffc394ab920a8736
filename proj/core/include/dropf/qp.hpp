#pragma once

#include <string>
#include <vector>

#include "dropf/types.hpp"

namespace dropf {

enum class SolveStatus { solved, infeasible, unbounded, max_iterations };

std::string to_string(SolveStatus status);

/// Half-open index range [begin, end) into the QP decision vector.
struct Slice {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
};

/// Named locations of every decision block of an assembled problem.
/// Every variable belongs to exactly one slice.
struct QpIndex {
  std::vector<Slice> d;       // per device, free D entries
  std::vector<Slice> e;       // per device
  Slice tau;                  // one per monitored constraint row
  std::vector<int> lambda;    // per row v, transport budget multiplier
  std::vector<Slice> s;       // per row v, per-sample epigraph values
  std::vector<Slice> gamma;   // per row v, support multipliers (may be empty)
  std::vector<Slice> aux;     // per row v, norm epigraph helpers (may be empty)
  int n_vars = 0;
};

/// min 1/2 z'Pz + q'z + c0  s.t.  A_eq z = b_eq,  A_in z <= u_in.
struct DroQp {
  SpMat P;
  Vector q;
  double c0 = 0.0;
  SpMat A_eq;
  Vector b_eq;
  SpMat A_in;
  Vector u_in;
  QpIndex index;

  int n() const { return static_cast<int>(q.size()); }
};

/// Incremental triplet-based builder used by the cost expansion and the
/// ambiguity epigraph. Appends are deterministic.
class QpBuilder {
 public:
  explicit QpBuilder(int n_initial);

  int n_vars() const { return n_vars_; }
  int add_vars(int count);

  void add_obj_quad(int i, int j, double v);  // adds v to P(i, j)
  void add_obj_lin(int i, double v);
  void add_obj_const(double v);

  int new_eq_row(double rhs);
  int new_ineq_row(double ub);
  void eq_coeff(int row, int col, double v);
  void ineq_coeff(int row, int col, double v);

  DroQp take(QpIndex index);

 private:
  int n_vars_ = 0;
  int n_eq_ = 0;
  int n_ineq_ = 0;
  std::vector<Triplet> p_;
  std::vector<double> q_;
  double c0_ = 0.0;
  std::vector<Triplet> eq_;
  std::vector<double> beq_;
  std::vector<Triplet> in_;
  std::vector<double> uin_;
};

struct QpSettings {
  double tolerance = 1e-8;
  int max_iterations = 100;
};

/// Residuals of the optimality system at a candidate point.
struct KktReport {
  double stationarity = 0.0;   // inf-norm of Pz + q + A_eq'y + A_in'lam
  double primal_eq = 0.0;      // inf-norm of A_eq z - b_eq
  double primal_ineq = 0.0;    // max positive part of A_in z - u_in
  double dual_feas = 0.0;      // max positive part of -lam
  double complementarity = 0.0;

  double worst() const;
};

struct QpResult {
  SolveStatus status = SolveStatus::max_iterations;
  Vector z;
  Vector y;    // equality multipliers
  Vector lam;  // inequality multipliers, >= 0
  double objective = 0.0;
  double dual_objective = 0.0;
  int iterations = 0;
  KktReport kkt;
};

/// Interior-point solve. status == solved implies every KktReport residual
/// is below tolerance times the problem scale; failures are reported as
/// infeasible / unbounded / max_iterations, never as a fake solve.
QpResult solve_qp(const DroQp& qp, const QpSettings& settings = {});

KktReport kkt_residuals(const DroQp& qp, const Vector& z, const Vector& y, const Vector& lam);

}  // namespace dropf
