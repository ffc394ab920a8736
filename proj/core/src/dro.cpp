#include "dropf/dro.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace dropf {

std::uint64_t row_fingerprint(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (int i = 0; i < row.size(); ++i) {
    double v = row(i);
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffull;
      h *= 1099511628211ull;
    }
  }
  return h;
}

Dataset make_dataset(const Matrix& samples, const Matrix& support_H,
                     const Vector& support_d) {
  if (samples.rows() == 0) throw DataError("dataset has no rows");
  if (samples.cols() == 0) throw DataError("dataset rows are empty");
  for (int i = 0; i < samples.rows(); ++i) {
    if (!samples.row(i).allFinite()) {
      std::ostringstream msg;
      msg << "sample " << i << " contains a NaN or infinite entry";
      throw DataError(msg.str());
    }
  }
  if (support_H.rows() > 0) {
    if (support_H.cols() != samples.cols()) {
      throw DataError("support matrix width does not match the sample dimension");
    }
    if (support_d.size() != support_H.rows()) {
      throw DataError("support bound length does not match the support row count");
    }
    for (int i = 0; i < samples.rows(); ++i) {
      Vector lhs = support_H * samples.row(i).transpose();
      for (int r = 0; r < lhs.size(); ++r) {
        if (lhs(r) > support_d(r) + 1e-9 * (1.0 + std::abs(support_d(r)))) {
          std::ostringstream msg;
          msg << "sample " << i << " violates support row " << r << " by "
              << lhs(r) - support_d(r);
          throw DataError(msg.str());
        }
      }
    }
  }
  Dataset data;
  data.samples = samples;
  data.support_H = support_H;
  data.support_d = support_d;
  data.fingerprints.reserve(samples.rows());
  for (int i = 0; i < samples.rows(); ++i) {
    data.fingerprints.push_back(row_fingerprint(samples.row(i)));
  }
  return data;
}

int MaxAffineLoss::dim() const {
  return pieces.empty() ? 0 : static_cast<int>(pieces.front().a0.size());
}

void MaxAffineLoss::require_valid(int n_y) const {
  if (pieces.empty()) throw ParamError("loss needs at least one affine piece");
  const int d = dim();
  for (size_t k = 0; k < pieces.size(); ++k) {
    const auto& p = pieces[k];
    if (p.a0.size() != d || p.A.rows() != d) {
      std::ostringstream msg;
      msg << "loss piece " << k << " has a mismatched uncertainty dimension";
      throw ParamError(msg.str());
    }
    if (p.A.cols() != n_y || p.beta.cols() != n_y) {
      std::ostringstream msg;
      msg << "loss piece " << k << " does not match the decision dimension " << n_y;
      throw ParamError(msg.str());
    }
    if (!p.a0.allFinite() || !std::isfinite(p.b0)) {
      std::ostringstream msg;
      msg << "loss piece " << k << " has a non-finite coefficient";
      throw ParamError(msg.str());
    }
  }
}

MaxAffineLoss cvar_pieces(const AffineExpr& g, double alpha, int tau_index) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    std::ostringstream msg;
    msg << "alpha must lie in (0, 1], got " << alpha;
    throw ParamError(msg.str());
  }
  const int n_y = static_cast<int>(g.A.cols());
  if (tau_index < 0 || tau_index >= n_y) {
    throw ParamError("threshold variable index is outside the decision vector");
  }
  MaxAffineLoss loss;
  AffineExpr hi = g;
  hi.beta.coeffRef(0, tau_index) += 1.0 - alpha;
  loss.pieces.push_back(std::move(hi));

  AffineExpr lo;
  lo.A = SpMat(g.dim(), n_y);
  lo.a0 = Vector::Zero(g.dim());
  lo.beta = SpMat(1, n_y);
  lo.beta.coeffRef(0, tau_index) = -alpha;
  lo.b0 = 0.0;
  loss.pieces.push_back(std::move(lo));
  return loss;
}

EpigraphBlock dro_epigraph(QpBuilder& builder, const MaxAffineLoss& loss,
                           const Dataset& data, const AmbiguitySet& ambiguity,
                           double rho) {
  loss.require_valid(builder.n_vars());
  if (data.dim() != loss.dim()) {
    std::ostringstream msg;
    msg << "dataset dimension " << data.dim() << " does not match the loss dimension "
        << loss.dim();
    throw ParamError(msg.str());
  }
  if (ambiguity.epsilon < 0.0) throw ParamError("ambiguity radius must be >= 0");
  if (rho < 0.0) throw ParamError("risk weight must be >= 0");
  if (ambiguity.has_support()) {
    if (ambiguity.support_H.cols() != loss.dim() ||
        ambiguity.support_d.size() != ambiguity.support_H.rows()) {
      throw ParamError("support polyhedron shapes do not match the loss dimension");
    }
  }

  const int N = data.count();
  const int K = static_cast<int>(loss.pieces.size());
  const int dim = loss.dim();
  const int hr = ambiguity.has_support() ? static_cast<int>(ambiguity.support_H.rows()) : 0;
  const bool dual_is_sum = ambiguity.norm == GroundNorm::linf;

  EpigraphBlock block;
  block.lambda = builder.add_vars(1);
  block.s = {builder.n_vars(), builder.n_vars() + N};
  builder.add_vars(N);
  if (hr > 0) {
    block.gamma = {builder.n_vars(), builder.n_vars() + N * K * hr};
    builder.add_vars(N * K * hr);
  } else {
    block.gamma = {builder.n_vars(), builder.n_vars()};
  }
  const int norm_groups = hr > 0 ? N * K : K;
  if (dual_is_sum) {
    block.aux = {builder.n_vars(), builder.n_vars() + norm_groups * dim};
    builder.add_vars(norm_groups * dim);
  } else {
    block.aux = {builder.n_vars(), builder.n_vars()};
  }

  builder.add_obj_lin(block.lambda, ambiguity.epsilon);
  for (int i = 0; i < N; ++i) builder.add_obj_lin(block.s.begin + i, 1.0 / N);

  auto gamma_var = [&](int i, int k, int h) {
    return block.gamma.begin + (i * K + k) * hr + h;
  };
  auto aux_var = [&](int group, int r) { return block.aux.begin + group * dim + r; };

  // epigraph rows: rho * loss piece value at sample i, plus support term, <= s_i
  for (int i = 0; i < N; ++i) {
    Vector xi = data.samples.row(i).transpose();
    Vector hxi;
    if (hr > 0) hxi = ambiguity.support_H * xi;
    for (int k = 0; k < K; ++k) {
      const AffineExpr& p = loss.pieces[k];
      int row = builder.new_ineq_row(-rho * (p.b0 + p.a0.dot(xi)));
      for (int c = 0; c < p.A.outerSize(); ++c) {
        double acc = 0.0;
        for (SpMat::InnerIterator it(p.A, c); it; ++it) acc += it.value() * xi(it.row());
        if (acc != 0.0) builder.ineq_coeff(row, c, rho * acc);
      }
      for (int c = 0; c < p.beta.outerSize(); ++c) {
        for (SpMat::InnerIterator it(p.beta, c); it; ++it) {
          builder.ineq_coeff(row, static_cast<int>(it.col()), rho * it.value());
        }
      }
      for (int h = 0; h < hr; ++h) {
        builder.ineq_coeff(row, gamma_var(i, k, h), ambiguity.support_d(h) - hxi(h));
      }
      builder.ineq_coeff(row, block.s.begin + i, -1.0);
    }
  }

  // dual-norm rows binding lambda: v = H' gamma_ik - rho a_k(y), per component r
  auto emit_norm_rows = [&](int i, int k, int group) {
    const AffineExpr& p = loss.pieces[k];
    for (int r = 0; r < dim; ++r) {
      for (int sign = 0; sign < 2; ++sign) {
        double sgn = sign == 0 ? 1.0 : -1.0;
        int row = builder.new_ineq_row(sgn * rho * p.a0(r));
        if (hr > 0) {
          for (int h = 0; h < hr; ++h) {
            double v = ambiguity.support_H(h, r);
            if (v != 0.0) builder.ineq_coeff(row, gamma_var(i, k, h), sgn * v);
          }
        }
        // -rho * A_k(r, :) y term
        for (int c = 0; c < p.A.outerSize(); ++c) {
          for (SpMat::InnerIterator it(p.A, c); it; ++it) {
            if (it.row() == r && it.value() != 0.0) {
              builder.ineq_coeff(row, c, -sgn * rho * it.value());
            }
          }
        }
        if (dual_is_sum) {
          builder.ineq_coeff(row, aux_var(group, r), -1.0);
        } else {
          builder.ineq_coeff(row, block.lambda, -1.0);
        }
      }
    }
    if (dual_is_sum) {
      int row = builder.new_ineq_row(0.0);
      for (int r = 0; r < dim; ++r) builder.ineq_coeff(row, aux_var(group, r), 1.0);
      builder.ineq_coeff(row, block.lambda, -1.0);
    }
  };

  if (hr > 0) {
    for (int i = 0; i < N; ++i) {
      for (int k = 0; k < K; ++k) emit_norm_rows(i, k, i * K + k);
    }
  } else {
    for (int k = 0; k < K; ++k) emit_norm_rows(-1, k, k);
  }

  for (int g = block.gamma.begin; g < block.gamma.end; ++g) {
    int row = builder.new_ineq_row(0.0);
    builder.ineq_coeff(row, g, -1.0);
  }
  return block;
}

double worst_case_expectation_oracle(const MaxAffineLoss& loss, const Vector& y,
                                     const Dataset& data, const AmbiguitySet& ambiguity) {
  if (ambiguity.has_support()) {
    throw ParamError(
        "closed-form worst-case expectation needs an unbounded support; this "
        "ambiguity set has support rows");
  }
  loss.require_valid(static_cast<int>(y.size()));
  if (data.dim() != loss.dim()) {
    throw ParamError("dataset dimension does not match the loss dimension");
  }
  const int K = static_cast<int>(loss.pieces.size());
  std::vector<Vector> slope(K);
  std::vector<double> intercept(K);
  double worst_dual = 0.0;
  for (int k = 0; k < K; ++k) {
    const AffineExpr& p = loss.pieces[k];
    slope[k] = p.a0 + p.A * y;
    intercept[k] = p.b0 + (p.beta * y)(0);
    double dual = ambiguity.norm == GroundNorm::l1 ? slope[k].cwiseAbs().maxCoeff()
                                                   : slope[k].cwiseAbs().sum();
    worst_dual = std::max(worst_dual, dual);
  }
  double mean_max = 0.0;
  for (int i = 0; i < data.count(); ++i) {
    Vector xi = data.samples.row(i).transpose();
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) best = std::max(best, slope[k].dot(xi) + intercept[k]);
    mean_max += best;
  }
  mean_max /= data.count();
  return mean_max + ambiguity.epsilon * worst_dual;
}

double empirical_cvar(const std::vector<double>& values, double alpha) {
  if (values.empty()) throw ParamError("empirical CVaR needs at least one value");
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    std::ostringstream msg;
    msg << "alpha must lie in (0, 1], got " << alpha;
    throw ParamError(msg.str());
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ParamError("empirical CVaR input has a non-finite value");
  }
  const int m = static_cast<int>(values.size());
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  int k = static_cast<int>(std::ceil(alpha * m));
  k = std::min(std::max(k, 1), m);
  double acc = 0.0;
  for (int i = 0; i + 1 < k; ++i) acc += sorted[i] / m;
  double boundary = std::max(0.0, alpha - static_cast<double>(k - 1) / m);
  acc += boundary * sorted[k - 1];
  return acc / alpha;
}

}  // namespace dropf
