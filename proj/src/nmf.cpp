#include "cellph/nmf.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/SVD>

namespace cellph {

namespace {

double half_sq(const Matrix& D, const Matrix& W, const Matrix& H) {
  return 0.5 * (D - W * H).squaredNorm();
}

double misfit(const Matrix& A, const Vector& b, const Vector& x) { return (b - A * x).squaredNorm(); }

// Feasible descent from y on the free set S = supp(y) u supp(hint): CGLS on
// the columns in S, then a step toward that solution clipped at the first
// bound, dropping the variables that hit zero. y stays in span(S), so the
// misfit never increases.
Vector free_set_descent(const Matrix& A, const Vector& b, Vector y, const Vector& hint) {
  const Eigen::Index n = A.cols();
  std::vector<Eigen::Index> S;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (y[j] > 0.0 || hint[j] > 0.0) S.push_back(j);
  }
  for (Eigen::Index round = 0; round <= n && !S.empty(); ++round) {
    Matrix As(A.rows(), static_cast<Eigen::Index>(S.size()));
    Vector ys(static_cast<Eigen::Index>(S.size()));
    for (std::size_t k = 0; k < S.size(); ++k) {
      As.col(static_cast<Eigen::Index>(k)) = A.col(S[k]);
      ys[static_cast<Eigen::Index>(k)] = y[S[k]];
    }
    const Vector z = cgls(As, b, Vector(), ys, CglsTarget{}).x;
    if (z.minCoeff() > 0.0) {
      for (std::size_t k = 0; k < S.size(); ++k) y[S[k]] = z[static_cast<Eigen::Index>(k)];
      break;
    }
    double alpha = 1.0;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      if (z[k] <= 0.0) alpha = std::min(alpha, ys[k] / (ys[k] - z[k]));
    }
    std::vector<Eigen::Index> keep;
    for (std::size_t k = 0; k < S.size(); ++k) {
      const Eigen::Index i = static_cast<Eigen::Index>(k);
      const double v = ys[i] + alpha * (z[i] - ys[i]);
      y[S[k]] = v > 0.0 ? v : 0.0;
      if (v > 0.0) keep.push_back(S[k]);
    }
    if (keep.size() == S.size()) break;
    S = std::move(keep);
  }
  return y;
}

// Non-negative update of one column or row: the IAS solution started from
// `current`, refined by free-set descent. The best of those and `current`
// by misfit is returned.
Vector safeguarded_update(const Matrix& A, const Vector& b, const Vector& current,
                          const IasConfig& base) {
  IasConfig cfg = base;
  cfg.x0 = current;
  const IasResult r = ias(A, b, cfg);
  Vector best = current;
  double best_fit = misfit(A, b, current);
  for (const Vector& cand : {r.x, free_set_descent(A, b, current, r.x)}) {
    const double f = misfit(A, b, cand);
    if (f < best_fit) {
      best_fit = f;
      best = cand;
    }
  }
  return best;
}

}  // namespace

IasConfig NmfOptions::default_ias() {
  IasConfig c;
  c.eta = 1.0;
  c.theta_scale = 1e8;
  c.tol_theta = 0.0;
  c.max_iter = 2;
  c.warm_start = true;
  return c;
}

double NmfResult::relative_error(const Matrix& D) const {
  const double n = D.norm();
  return n > 0.0 ? (D - W * H).norm() / n : (W * H).norm();
}

NmfResult nmf(const Matrix& D, int rank, const NmfOptions& options) {
  const Eigen::Index m = D.rows(), n = D.cols();
  if (rank < 1 || rank > std::min(m, n)) throw std::invalid_argument("nmf: rank out of range");
  if (D.size() > 0 && D.minCoeff() < 0.0) throw std::invalid_argument("nmf: D must be non-negative");

  NmfResult out;
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  out.W.resize(m, rank);
  out.H.resize(rank, n);
  for (Eigen::Index j = 0; j < rank; ++j) for (Eigen::Index i = 0; i < m; ++i) out.W(i, j) = u(rng);
  for (Eigen::Index j = 0; j < n; ++j) for (Eigen::Index i = 0; i < rank; ++i) out.H(i, j) = u(rng);
  const double wh = (out.W * out.H).norm();
  if (wh > 0.0 && D.norm() > 0.0) {
    const double s = std::sqrt(D.norm() / wh);
    out.W *= s;
    out.H *= s;
  }

  out.objective.push_back(half_sq(D, out.W, out.H));
  for (out.sweeps = 0; out.sweeps < options.max_sweeps;) {
    const double before = out.objective.back();
    ++out.sweeps;
    for (Eigen::Index j = 0; j < n; ++j) {
      out.H.col(j) = safeguarded_update(out.W, D.col(j), out.H.col(j), options.ias);
    }
    out.objective.push_back(half_sq(D, out.W, out.H));

    const Matrix Ht = out.H.transpose();
    for (Eigen::Index i = 0; i < m; ++i) {
      out.W.row(i) = safeguarded_update(Ht, D.row(i).transpose(), out.W.row(i).transpose(), options.ias)
                         .transpose();
    }
    out.objective.push_back(half_sq(D, out.W, out.H));

    const double after = out.objective.back();
    if (before - after <= options.stagnation_tol * before) {
      out.converged = true;
      break;
    }
  }

  // Move the scale into H; W H is unchanged up to rounding.
  for (Eigen::Index c = 0; c < rank; ++c) {
    const double s = out.W.col(c).norm();
    if (s > 0.0) {
      out.W.col(c) /= s;
      out.H.row(c) *= s;
    }
  }
  return out;
}

Vector singular_values(const Matrix& D) {
  Eigen::BDCSVD<Matrix> svd(D);
  return svd.singularValues();
}

int select_rank(const Matrix& D, double threshold) {
  const Vector s = singular_values(D);
  const int cap = std::max<int>(1, static_cast<int>(s.size()) - 1);
  if (s.size() == 0 || s[0] == 0.0) return 1;
  for (int k = 1; k < cap; ++k) {
    if (s[k] / s[0] < threshold) return k;
  }
  return cap;
}

}  // namespace cellph
