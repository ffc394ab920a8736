#pragma once

#include <cstdint>
#include <unordered_set>
#include <vector>

#include "dropf/qp.hpp"
#include "dropf/types.hpp"

namespace dropf {

/// Empirical sample set of stacked forecast errors, one row per scenario,
/// together with the support polytope H xi <= d (0 rows: all of R^dim).
struct Dataset {
  Matrix samples;                        // N x dim
  Matrix support_H;                      // rows x dim
  Vector support_d;
  std::vector<std::uint64_t> fingerprints;  // per-row content hash

  int count() const { return static_cast<int>(samples.rows()); }
  int dim() const { return static_cast<int>(samples.cols()); }
  bool has_support() const { return support_H.rows() > 0; }
};

std::uint64_t row_fingerprint(const Eigen::Ref<const Eigen::RowVectorXd>& row);

/// Validates shape/finiteness (and support membership when H is nonempty)
/// and computes per-row fingerprints.
Dataset make_dataset(const Matrix& samples, const Matrix& support_H = Matrix(),
                     const Vector& support_d = Vector());

enum class GroundNorm { l1, linf };

/// Wasserstein ball of radius epsilon around the empirical distribution,
/// with polyhedral support H xi <= d (empty H means unbounded support).
struct AmbiguitySet {
  double epsilon = 0.0;
  GroundNorm norm = GroundNorm::l1;
  Matrix support_H;  // 0 x dim when unbounded
  Vector support_d;

  bool has_support() const { return support_H.rows() > 0; }
};

/// Scalar affine function of (decision y, uncertainty xi):
///   value = (A y + a0)' xi + beta' y + b0.
struct AffineExpr {
  SpMat A;      // dim x n_y, slope-on-xi dependence on the decision
  Vector a0;    // dim, fixed slope on xi
  SpMat beta;   // 1 x n_y, intercept dependence on the decision
  double b0 = 0.0;

  int dim() const { return static_cast<int>(a0.size()); }
};

/// Pointwise maximum of affine pieces; losses stay in this form so the
/// worst-case expectation has an exact finite reformulation.
struct MaxAffineLoss {
  std::vector<AffineExpr> pieces;

  int dim() const;
  void require_valid(int n_y) const;
};

/// Two-piece encoding whose worst-case expectation equals
/// alpha * CVaR_alpha(g) at the optimal threshold tau:
///   max{ g(y, xi) + tau (1 - alpha), -tau alpha }.
MaxAffineLoss cvar_pieces(const AffineExpr& g, double alpha, int tau_index);

/// Variable/constraint block appended to the builder for one loss row.
struct EpigraphBlock {
  int lambda = 0;  // variable index
  Slice s;
  Slice gamma;  // empty when the support is unbounded
  Slice aux;    // empty for the l1 ground metric
};

/// Appends the exact finite reformulation of
///   sup_{Q in ball} E_Q[ rho * max_k loss piece k ]
/// to the builder: objective lambda * epsilon + mean of s, epigraph rows per
/// (sample, piece), dual-norm rows binding lambda, and gamma >= 0.
EpigraphBlock dro_epigraph(QpBuilder& builder, const MaxAffineLoss& loss,
                           const Dataset& data, const AmbiguitySet& ambiguity,
                           double rho);

/// Closed-form worst-case expectation of max_k(a_k(y)' xi + b_k(y)) over an
/// unbounded-support ball: sample average of the max plus epsilon times the
/// largest dual norm of a slope. Errors on bounded support.
double worst_case_expectation_oracle(const MaxAffineLoss& loss, const Vector& y,
                                     const Dataset& data, const AmbiguitySet& ambiguity);

/// Empirical CVaR at level alpha of the sample values (tail average with a
/// fractional atom at the boundary). alpha in (0, 1]; alpha = 1 is the mean.
double empirical_cvar(const std::vector<double>& values, double alpha);

}  // namespace dropf
