#pragma once

#include <string>
#include <vector>

#include "dropf/dro.hpp"
#include "dropf/policy.hpp"
#include "dropf/qp.hpp"

namespace dropf {

/// Risk/ambiguity knobs of one solve.
struct RiskConfig {
  double alpha = 0.1;    // CVaR tail level, in (0, 1]
  double rho = 1.0;      // weight of the risk term, >= 0
  double epsilon = 0.0;  // ambiguity radius, >= 0
  GroundNorm norm = GroundNorm::l1;
};

void validate_risk(const RiskConfig& risk);

/// 1/2 z'P z + q'z + c over the policy vector.
struct QuadraticForm {
  SpMat P;
  Vector q;
  double c = 0.0;

  double value(const Vector& z) const;
};

/// Expected operating cost under the empirical moments of the dataset,
/// expanded over the policy decision vector.
QuadraticForm expected_cost(const HorizonModel& model, const PolicyLayout& layout,
                            const Dataset& data);

/// Affine map (in decision and uncertainty) of one monitored flow row:
/// value = flow - limit for that (line, direction, step).
AffineExpr line_loss_coeffs(const HorizonModel& model, const PolicyLayout& layout,
                            int flow_row, int n_y);

/// Affine map of one local device constraint row: value = lhs - bound.
AffineExpr device_loss_coeffs(const HorizonModel& model, const PolicyLayout& layout,
                              int device, int local_row, int n_y);

/// Identity of one monitored constraint row v in assembly order.
struct MonitoredRow {
  bool is_line = false;
  int flow_row = -1;  // when is_line
  int device = -1;    // when !is_line
  int local_row = -1;
  std::string label;
};

std::vector<MonitoredRow> monitored_rows(const HorizonModel& model);

/// Full convex program: expected cost plus rho * sum over monitored rows of
/// the worst-case CVaR epigraph, subject to balance equalities.
DroQp assemble(const HorizonModel& model, const PolicyLayout& layout,
               const Dataset& data, const RiskConfig& risk);

struct Solution {
  SolveStatus status = SolveStatus::max_iterations;
  AffinePolicy policy;
  Vector tau;                     // per monitored row
  double objective = 0.0;         // total
  double cost_term = 0.0;         // expected-cost part
  double dro_term = 0.0;          // rho-weighted risk part, sum over rows
  std::vector<double> dro_term_per_row;  // lambda_v eps + mean_i s_iv
  std::vector<double> predicted_cvar;    // dro row term / (rho alpha); NaN at rho = 0
  std::vector<std::string> row_labels;
  int iterations = 0;
  KktReport kkt;
  Vector z;  // full decision vector of the underlying QP
};

/// Assemble + solve + unpack. Non-solved statuses are returned, not thrown.
Solution solve_opf(const HorizonModel& model, const Dataset& data, const RiskConfig& risk,
                   const QpSettings& settings = {});

}  // namespace dropf
