#include "dropf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include <Eigen/SparseLU>

namespace dropf {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::solved: return "solved";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iterations: return "max_iterations";
  }
  return "unknown";
}

QpBuilder::QpBuilder(int n_initial) : n_vars_(n_initial), q_(n_initial, 0.0) {
  if (n_initial < 0) throw ParamError("builder needs a non-negative variable count");
}

int QpBuilder::add_vars(int count) {
  if (count < 0) throw ParamError("cannot add a negative variable count");
  int first = n_vars_;
  n_vars_ += count;
  q_.resize(n_vars_, 0.0);
  return first;
}

void QpBuilder::add_obj_quad(int i, int j, double v) { p_.emplace_back(i, j, v); }
void QpBuilder::add_obj_lin(int i, double v) { q_[i] += v; }
void QpBuilder::add_obj_const(double v) { c0_ += v; }

int QpBuilder::new_eq_row(double rhs) {
  beq_.push_back(rhs);
  return n_eq_++;
}

int QpBuilder::new_ineq_row(double ub) {
  uin_.push_back(ub);
  return n_ineq_++;
}

void QpBuilder::eq_coeff(int row, int col, double v) { eq_.emplace_back(row, col, v); }
void QpBuilder::ineq_coeff(int row, int col, double v) { in_.emplace_back(row, col, v); }

DroQp QpBuilder::take(QpIndex index) {
  DroQp qp;
  qp.P.resize(n_vars_, n_vars_);
  qp.P.setFromTriplets(p_.begin(), p_.end());
  qp.q = Eigen::Map<const Vector>(q_.data(), n_vars_);
  qp.c0 = c0_;
  qp.A_eq.resize(n_eq_, n_vars_);
  qp.A_eq.setFromTriplets(eq_.begin(), eq_.end());
  qp.b_eq = Eigen::Map<const Vector>(beq_.data(), n_eq_);
  qp.A_in.resize(n_ineq_, n_vars_);
  qp.A_in.setFromTriplets(in_.begin(), in_.end());
  qp.u_in = Eigen::Map<const Vector>(uin_.data(), n_ineq_);
  index.n_vars = n_vars_;
  qp.index = std::move(index);
  return qp;
}

double KktReport::worst() const {
  return std::max({stationarity, primal_eq, primal_ineq, dual_feas, complementarity});
}

KktReport kkt_residuals(const DroQp& qp, const Vector& z, const Vector& y,
                        const Vector& lam) {
  KktReport report;
  Vector stat = qp.P * z + qp.q;
  if (y.size() > 0) stat += qp.A_eq.transpose() * y;
  if (lam.size() > 0) stat += qp.A_in.transpose() * lam;
  report.stationarity = stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0;
  if (qp.b_eq.size() > 0) {
    report.primal_eq = (qp.A_eq * z - qp.b_eq).cwiseAbs().maxCoeff();
  }
  if (qp.u_in.size() > 0) {
    Vector slack = qp.u_in - qp.A_in * z;
    report.primal_ineq = std::max(0.0, (-slack).maxCoeff());
    report.dual_feas = std::max(0.0, (-lam).maxCoeff());
    report.complementarity = (lam.array() * slack.array()).abs().maxCoeff();
  }
  return report;
}

namespace {

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

struct Equilibration {
  Vector d;     // variable factors, z = d .* z_scaled
  Vector r_eq;  // equality row factors, y = r_eq .* y_scaled
  Vector r_in;  // inequality row factors, lam = r_in .* lam_scaled
};

// Ruiz passes over the stacked matrix [P A'; A 0]: rows and variable columns
// are alternately scaled toward unit infinity norm. Policy gains, offsets, and
// epigraph variables live on very different magnitudes, and the interior-point
// scaling matrix squares whatever spread survives.
Equilibration equilibrate(const DroQp& qp, int n, int me, int mi) {
  Equilibration eq;
  eq.d = Vector::Ones(n);
  eq.r_eq = Vector::Ones(me);
  eq.r_in = Vector::Ones(mi);
  for (int pass = 0; pass < 10; ++pass) {
    Vector cn = Vector::Zero(n);
    Vector re = Vector::Zero(me);
    Vector ri = Vector::Zero(mi);
    for (int k = 0; k < qp.P.outerSize(); ++k) {
      for (SpMat::InnerIterator it(qp.P, k); it; ++it) {
        double v = std::abs(it.value()) * eq.d(it.row()) * eq.d(it.col());
        cn(it.col()) = std::max(cn(it.col()), v);
        cn(it.row()) = std::max(cn(it.row()), v);
      }
    }
    for (int k = 0; k < qp.A_eq.outerSize(); ++k) {
      for (SpMat::InnerIterator it(qp.A_eq, k); it; ++it) {
        double v = std::abs(it.value()) * eq.r_eq(it.row()) * eq.d(it.col());
        cn(it.col()) = std::max(cn(it.col()), v);
        re(it.row()) = std::max(re(it.row()), v);
      }
    }
    for (int k = 0; k < qp.A_in.outerSize(); ++k) {
      for (SpMat::InnerIterator it(qp.A_in, k); it; ++it) {
        double v = std::abs(it.value()) * eq.r_in(it.row()) * eq.d(it.col());
        cn(it.col()) = std::max(cn(it.col()), v);
        ri(it.row()) = std::max(ri(it.row()), v);
      }
    }
    double drift = 1.0;
    auto apply = [&drift](Vector& scale, const Vector& norms) {
      for (int i = 0; i < scale.size(); ++i) {
        if (norms(i) <= 0.0) continue;
        double delta = 1.0 / std::sqrt(std::clamp(norms(i), 1e-12, 1e12));
        scale(i) *= delta;
        drift = std::max({drift, delta, 1.0 / delta});
      }
    };
    apply(eq.d, cn);
    apply(eq.r_eq, re);
    apply(eq.r_in, ri);
    if (drift < 1.05) break;
  }
  return eq;
}

SpMat scale_both(const SpMat& m, const Vector& r, const Vector& c) {
  std::vector<Triplet> trips;
  trips.reserve(m.nonZeros());
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SpMat::InnerIterator it(m, k); it; ++it) {
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                         it.value() * r(it.row()) * c(it.col()));
    }
  }
  SpMat out(m.rows(), m.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

// Entrywise rc / w with the denominator floored and the result clamped, so a
// slack collapsing to denormal range cannot poison the search direction.
Vector safe_quotient(const Vector& rc, const Vector& w) {
  Vector out(rc.size());
  for (int i = 0; i < rc.size(); ++i) {
    out(i) = rc(i) / std::max(w(i), 1e-300);
    out(i) = std::clamp(out(i), -1e18, 1e18);
  }
  return out;
}

// Largest alpha in (0, 1] with v + alpha*dv >= 0.
double max_step(const Vector& v, const Vector& dv) {
  double alpha = 1.0;
  for (int i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

struct KktSystem {
  const DroQp& qp;
  int n, me, mi;
  SpMat G_row;  // row-major-ish copy of A_in for per-row access
  double delta_z = 0.0;
  double delta_y = 0.0;
  Eigen::SparseLU<SpMat> lu;
  bool analyzed = false;
  SpMat K;

  explicit KktSystem(const DroQp& problem)
      : qp(problem),
        n(problem.n()),
        me(static_cast<int>(problem.b_eq.size())),
        mi(static_cast<int>(problem.u_in.size())) {
    G_row = qp.A_in;
  }

  bool factor(const Vector& d) {
    std::vector<Triplet> trips;
    trips.reserve(qp.P.nonZeros() + 2 * qp.A_eq.nonZeros() + n + me + 64);
    for (int k = 0; k < qp.P.outerSize(); ++k) {
      for (SpMat::InnerIterator it(qp.P, k); it; ++it) {
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                           it.value());
      }
    }
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, delta_z);
    if (mi > 0) {
      // G' diag(d) G via the outer product of each constraint row
      SpMat gt = qp.A_in.transpose();  // columns are constraint rows
      for (int r = 0; r < mi; ++r) {
        for (SpMat::InnerIterator a(gt, r); a; ++a) {
          for (SpMat::InnerIterator b(gt, r); b; ++b) {
            trips.emplace_back(static_cast<int>(a.row()), static_cast<int>(b.row()),
                               d(r) * a.value() * b.value());
          }
        }
      }
    }
    for (int k = 0; k < qp.A_eq.outerSize(); ++k) {
      for (SpMat::InnerIterator it(qp.A_eq, k); it; ++it) {
        int r = static_cast<int>(it.row());
        int c = static_cast<int>(it.col());
        trips.emplace_back(n + r, c, it.value());
        trips.emplace_back(c, n + r, it.value());
      }
    }
    for (int r = 0; r < me; ++r) trips.emplace_back(n + r, n + r, -delta_y);

    K.resize(n + me, n + me);
    K.setFromTriplets(trips.begin(), trips.end());
    K.makeCompressed();
    if (!analyzed) {
      lu.analyzePattern(K);
      analyzed = true;
    }
    lu.factorize(K);
    return lu.info() == Eigen::Success;
  }

  // Solves K [dz; dy] = [r1; r2] with one refinement pass.
  bool solve(const Vector& r1, const Vector& r2, Vector& dz, Vector& dy) const {
    Vector rhs(n + me);
    rhs.head(n) = r1;
    if (me > 0) rhs.tail(me) = r2;
    Vector x = lu.solve(rhs);
    if (!x.allFinite()) return false;
    Vector resid = rhs - K * x;
    Vector corr = lu.solve(resid);
    if (corr.allFinite()) x += corr;
    dz = x.head(n);
    dy = me > 0 ? Vector(x.tail(me)) : Vector();
    return true;
  }
};

QpResult finish(const DroQp& qp, QpResult res, const Vector& z, const Vector& y,
                const Vector& lam) {
  res.z = z;
  res.y = y;
  res.lam = lam;
  res.objective = 0.5 * z.dot(qp.P * z) + qp.q.dot(z) + qp.c0;
  res.dual_objective = -0.5 * z.dot(qp.P * z) + qp.c0;
  if (y.size() > 0) res.dual_objective -= qp.b_eq.dot(y);
  if (lam.size() > 0) res.dual_objective -= qp.u_in.dot(lam);
  res.kkt = kkt_residuals(qp, z, y, lam);
  return res;
}

// Equality-constrained (or unconstrained) convex QP: a single regularized
// factorization plus iterative refinement against the exact system.
QpResult solve_equality_qp(const DroQp& qp, const QpSettings& st) {
  const int n = qp.n();
  const int me = static_cast<int>(qp.b_eq.size());
  const double qs = 1.0 + inf_norm(qp.q);
  const double bs = 1.0 + inf_norm(qp.b_eq);

  KktSystem sys(qp);
  double scale = 1.0;
  for (int k = 0; k < qp.P.outerSize(); ++k) {
    for (SpMat::InnerIterator it(qp.P, k); it; ++it) {
      scale = std::max(scale, std::abs(it.value()));
    }
  }
  sys.delta_z = 1e-12 * scale;
  sys.delta_y = 1e-12 * scale;

  Vector z = Vector::Zero(n);
  Vector y = Vector::Zero(me);
  QpResult res;

  for (int attempt = 0; attempt < 4; ++attempt) {
    if (sys.factor(Vector())) break;
    sys.delta_z *= 1e3;
    sys.delta_y *= 1e3;
    if (attempt == 3) {
      res.status = SolveStatus::max_iterations;
      return finish(qp, res, z, y, Vector());
    }
  }

  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 50; ++it) {
    Vector r1 = -(qp.P * z + qp.q);
    if (me > 0) r1 -= qp.A_eq.transpose() * y;
    Vector r2 = me > 0 ? Vector(qp.b_eq - qp.A_eq * z) : Vector();
    double worst = std::max(inf_norm(r1) / qs, inf_norm(r2) / bs);
    if (worst <= 0.1 * st.tolerance) break;
    if (worst > 0.9 * prev && it > 3) break;  // stalled
    prev = worst;
    Vector dz, dy;
    if (!sys.solve(r1, r2, dz, dy)) break;
    z += dz;
    if (me > 0) y += dy;
    res.iterations = it + 1;
  }

  res = finish(qp, res, z, y, Vector());
  bool stat_ok = res.kkt.stationarity <= st.tolerance * qs;
  bool eq_ok = res.kkt.primal_eq <= st.tolerance * bs;
  if (stat_ok && eq_ok) {
    res.status = SolveStatus::solved;
  } else if (!eq_ok) {
    res.status = SolveStatus::infeasible;
  } else {
    res.status = SolveStatus::unbounded;
  }
  return res;
}

// Inequality-constrained path; expects constraint rows pre-scaled to
// comparable magnitudes.
QpResult solve_ipm(const DroQp& qp, const QpSettings& settings) {
  const int n = qp.n();
  const int me = static_cast<int>(qp.b_eq.size());
  const int mi = static_cast<int>(qp.u_in.size());
  const double qs = 1.0 + inf_norm(qp.q);
  const double bs = 1.0 + inf_norm(qp.b_eq);
  const double us = 1.0 + inf_norm(qp.u_in);
  const double tol = settings.tolerance;

  KktSystem sys(qp);
  double scale = 1.0;
  for (int k = 0; k < qp.P.outerSize(); ++k) {
    for (SpMat::InnerIterator it(qp.P, k); it; ++it) {
      scale = std::max(scale, std::abs(it.value()));
    }
  }
  const double base_reg = 1e-10 * scale;
  sys.delta_z = base_reg;
  sys.delta_y = base_reg;

  // starting point from the equality system under unit regularization: with a
  // tiny shift the components outside the range of P and A_eq land at -q/delta,
  // and iterates that large floor the attainable residuals at rounding noise
  Vector z = Vector::Zero(n);
  Vector y = Vector::Zero(me);
  {
    KktSystem init(qp);
    init.delta_z = std::max(1.0, scale);
    init.delta_y = std::max(1.0, scale);
    if (init.factor(Vector::Zero(mi))) {
      Vector dz, dy;
      if (init.solve(-qp.q, qp.b_eq, dz, dy)) {
        z = dz;
        if (me > 0) y = dy;
      }
    }
  }
  Vector w = qp.u_in - qp.A_in * z;
  double shift = std::max(0.0, -1.5 * w.minCoeff()) + 0.01 * us;
  w.array() += shift;
  Vector lam = Vector::Ones(mi);

  QpResult res;
  const double mu0 = w.dot(lam) / mi;

  // abnormal exits return the best iterate seen, never the last wreckage
  double best_score = std::numeric_limits<double>::infinity();
  Vector best_z = z, best_y = y, best_lam = lam;
  auto residual_score = [&]() {
    Vector r_d = qp.P * z + qp.q + qp.A_in.transpose() * lam;
    if (me > 0) r_d += qp.A_eq.transpose() * y;
    Vector r_p = me > 0 ? Vector(qp.A_eq * z - qp.b_eq) : Vector();
    Vector slack = qp.u_in - qp.A_in * z;
    double viol = std::max(0.0, (-slack).maxCoeff());
    double comp = (lam.array() * slack.array().max(0.0)).maxCoeff();
    double obj = 0.5 * z.dot(qp.P * z) + qp.q.dot(z) + qp.c0;
    return std::max({inf_norm(r_d) / qs, inf_norm(r_p) / bs, viol / us,
                     comp / (1.0 + std::abs(obj))});
  };
  auto remember = [&](double score) {
    if (score < best_score && z.allFinite() && lam.allFinite() && y.allFinite()) {
      best_score = score;
      best_z = z;
      best_y = y;
      best_lam = lam;
    }
  };
  auto bail = [&](SolveStatus status) {
    res.status = status;
    return finish(qp, res, best_z, best_y, best_lam);
  };

  const bool trace = std::getenv("DROPF_IPM_TRACE") != nullptr;
  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    res.iterations = iter;
    Vector r_d = qp.P * z + qp.q + qp.A_in.transpose() * lam;
    if (me > 0) r_d += qp.A_eq.transpose() * y;
    Vector r_p = me > 0 ? Vector(qp.A_eq * z - qp.b_eq) : Vector();
    Vector r_g = qp.A_in * z + w - qp.u_in;
    double mu = w.dot(lam) / mi;
    if (trace) {
      std::fprintf(stderr,
                   "it %3d mu %.3e rd %.3e rg %.3e |z| %.3e |lam| %.3e wmin %.3e\n",
                   iter, mu, inf_norm(r_d), inf_norm(r_g), inf_norm(z), inf_norm(lam),
                   w.minCoeff());
    }

    double obj = 0.5 * z.dot(qp.P * z) + qp.q.dot(z) + qp.c0;
    Vector slack = qp.u_in - qp.A_in * z;
    double viol = std::max(0.0, (-slack).maxCoeff());
    double comp = (lam.array() * slack.array().max(0.0)).maxCoeff();
    bool ok = inf_norm(r_d) <= tol * qs && inf_norm(r_p) <= tol * bs &&
              viol <= tol * us && comp <= tol * (1.0 + std::abs(obj));
    if (ok) {
      res.status = SolveStatus::solved;
      return finish(qp, res, z, y, lam);
    }
    remember(std::max({inf_norm(r_d) / qs, inf_norm(r_p) / bs, viol / us,
                       comp / (1.0 + std::abs(obj))}));

    // divergence certificates
    double dual_scale = std::max(inf_norm(y), inf_norm(lam));
    if (dual_scale > 1e8 * (1.0 + mu0)) {
      Vector yn = y / dual_scale;
      Vector ln = lam / dual_scale;
      Vector atd = qp.A_in.transpose() * ln;
      if (me > 0) atd += qp.A_eq.transpose() * yn;
      double gain = -(me > 0 ? qp.b_eq.dot(yn) : 0.0) - qp.u_in.dot(ln);
      if (inf_norm(atd) <= 1e-6 && gain > 1e-8) {
        res.status = SolveStatus::infeasible;
        return finish(qp, res, z, y, lam);
      }
    }
    double z_scale = inf_norm(z);
    if (z_scale > 1e10 * (1.0 + qs)) {
      Vector zn = z / z_scale;
      double pcurv = zn.dot(qp.P * zn);
      double eqmove = me > 0 ? inf_norm(Vector(qp.A_eq * zn)) : 0.0;
      double inmove = (qp.A_in * zn).maxCoeff();
      if (pcurv <= 1e-8 && eqmove <= 1e-6 && inmove <= 1e-6 && qp.q.dot(zn) < -1e-8) {
        res.status = SolveStatus::unbounded;
        return finish(qp, res, z, y, lam);
      }
    }

    Vector d = safe_quotient(lam, w);
    bool factored = false;
    sys.delta_z = base_reg;
    sys.delta_y = base_reg;
    for (int attempt = 0; attempt < 5; ++attempt) {
      if (sys.factor(d)) {
        factored = true;
        break;
      }
      sys.delta_z = std::max(sys.delta_z * 100.0, 1e-12);
      sys.delta_y = std::max(sys.delta_y * 100.0, 1e-12);
    }
    if (!factored) return bail(SolveStatus::max_iterations);

    // predictor
    Vector rc = w.cwiseProduct(lam);
    Vector rhs1 = -r_d - qp.A_in.transpose() *
                             (d.cwiseProduct(r_g) - safe_quotient(rc, w));
    Vector rhs2 = me > 0 ? Vector(-r_p) : Vector();
    Vector dz, dy;
    bool step_ok = sys.solve(rhs1, rhs2, dz, dy);
    for (int attempt = 0; !step_ok && attempt < 3; ++attempt) {
      sys.delta_z = std::max(sys.delta_z * 1e4, 1e-8 * scale);
      sys.delta_y = std::max(sys.delta_y * 1e4, 1e-8 * scale);
      if (sys.factor(d)) step_ok = sys.solve(rhs1, rhs2, dz, dy);
    }
    if (!step_ok) return bail(SolveStatus::max_iterations);
    Vector dw = -r_g - qp.A_in * dz;
    Vector dl = d.cwiseProduct(qp.A_in * dz + r_g) - safe_quotient(rc, w);

    double ap = max_step(w, dw);
    double ad = max_step(lam, dl);
    double mu_aff = (w + ap * dw).dot(lam + ad * dl) / mi;
    double sigma = std::pow(std::max(mu_aff, 0.0) / std::max(mu, 1e-300), 3);
    sigma = std::min(1.0, std::max(0.0, sigma));

    // corrector reusing the factorization
    rc = w.cwiseProduct(lam) + dw.cwiseProduct(dl);
    rc.array() -= sigma * mu;
    rhs1 = -r_d - qp.A_in.transpose() * (d.cwiseProduct(r_g) - safe_quotient(rc, w));
    step_ok = sys.solve(rhs1, rhs2, dz, dy);
    for (int attempt = 0; !step_ok && attempt < 3; ++attempt) {
      sys.delta_z = std::max(sys.delta_z * 1e4, 1e-8 * scale);
      sys.delta_y = std::max(sys.delta_y * 1e4, 1e-8 * scale);
      if (sys.factor(d)) step_ok = sys.solve(rhs1, rhs2, dz, dy);
    }
    if (!step_ok) return bail(SolveStatus::max_iterations);
    dw = -r_g - qp.A_in * dz;
    dl = d.cwiseProduct(qp.A_in * dz + r_g) - safe_quotient(rc, w);

    double eta = mu < 1e-6 ? 0.9999 : 0.995;
    ap = std::min(1.0, eta * max_step(w, dw));
    ad = std::min(1.0, eta * max_step(lam, dl));
    if (trace) std::fprintf(stderr, "       ap %.3e ad %.3e sigma %.3e\n", ap, ad, sigma);
    z += ap * dz;
    w += ap * dw;
    if (me > 0) y += ad * dy;
    lam += ad * dl;
  }

  remember(residual_score());
  return bail(SolveStatus::max_iterations);
}

}  // namespace

QpResult solve_qp(const DroQp& qp, const QpSettings& settings) {
  const int n = qp.n();
  const int me = static_cast<int>(qp.b_eq.size());
  const int mi = static_cast<int>(qp.u_in.size());
  if (qp.P.rows() != n || qp.P.cols() != n) {
    throw SolveError("quadratic term does not match the variable count");
  }
  if (qp.A_eq.cols() != n && me > 0) {
    throw SolveError("equality matrix does not match the variable count");
  }
  if (qp.A_in.cols() != n && mi > 0) {
    throw SolveError("inequality matrix does not match the variable count");
  }
  if (n == 0) {
    QpResult res;
    res.status = (me == 0 || inf_norm(qp.b_eq) <= settings.tolerance)
                     ? SolveStatus::solved
                     : SolveStatus::infeasible;
    res.objective = qp.c0;
    res.dual_objective = qp.c0;
    return res;
  }
  if (mi == 0) return solve_equality_qp(qp, settings);

  Equilibration eq = equilibrate(qp, n, me, mi);
  DroQp sq;
  sq.c0 = qp.c0;
  sq.index = qp.index;
  sq.P = scale_both(qp.P, eq.d, eq.d);
  sq.q = qp.q.cwiseProduct(eq.d);
  sq.A_eq = scale_both(qp.A_eq, eq.r_eq, eq.d);
  sq.b_eq = me > 0 ? Vector(qp.b_eq.cwiseProduct(eq.r_eq)) : qp.b_eq;
  sq.A_in = scale_both(qp.A_in, eq.r_in, eq.d);
  sq.u_in = qp.u_in.cwiseProduct(eq.r_in);

  QpResult res = solve_ipm(sq, settings);
  // the scaled solution and multipliers map back through the same diagonals
  Vector z = res.z.cwiseProduct(eq.d);
  Vector y = me > 0 ? Vector(res.y.cwiseProduct(eq.r_eq)) : res.y;
  Vector lam = res.lam.cwiseProduct(eq.r_in);
  return finish(qp, res, z, y, lam);
}

}  // namespace dropf
