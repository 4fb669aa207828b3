#pragma once

// Reference solvers written independently of the library, used only as test
// oracles.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Lawson-Hanson active-set NNLS.
inline VectorXd lawson_hanson(const MatrixXd& A, const VectorXd& b, int max_outer = 1000) {
  const Eigen::Index n = A.cols();
  std::vector<bool> passive(n, false);
  VectorXd x = VectorXd::Zero(n);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * A.cwiseAbs().colwise().sum().maxCoeff() *
                     static_cast<double>(std::max(A.rows(), n));
  auto solve_passive = [&]() {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j) if (passive[j]) idx.push_back(j);
    MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) Ap.col(static_cast<Eigen::Index>(k)) = A.col(idx[k]);
    const VectorXd zp = Ap.colPivHouseholderQr().solve(b);
    VectorXd z = VectorXd::Zero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) z[idx[k]] = zp[static_cast<Eigen::Index>(k)];
    return z;
  };
  for (int outer = 0; outer < max_outer; ++outer) {
    const VectorXd w = A.transpose() * (b - A * x);
    Eigen::Index t = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[j] && w[j] > best) { best = w[j]; t = j; }
    }
    if (t < 0) break;
    passive[t] = true;
    for (int inner = 0; inner < 10 * n; ++inner) {
      VectorXd z = solve_passive();
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j) if (passive[j] && z[j] <= 0.0) feasible = false;
      if (feasible) { x = z; break; }
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && z[j] <= 0.0) alpha = std::min(alpha, x[j] / (x[j] - z[j]));
      }
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && x[j] <= tol) { passive[j] = false; x[j] = 0.0; }
      }
    }
  }
  return x;
}

// Cyclic coordinate descent for min 1/2 |b - A x|^2 + w.x over x >= 0.
inline VectorXd weighted_l1_nonneg(const MatrixXd& A, const VectorXd& b, const VectorXd& w,
                                   int max_sweeps = 200000, double tol = 1e-15) {
  const Eigen::Index n = A.cols();
  VectorXd x = VectorXd::Zero(n);
  VectorXd r = b;
  const VectorXd col_sq = A.colwise().squaredNorm().transpose();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double biggest = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (col_sq[j] == 0.0) continue;
      const double g = A.col(j).dot(r) + col_sq[j] * x[j];
      const double xn = std::max(0.0, (g - w[j]) / col_sq[j]);
      const double d = xn - x[j];
      if (d != 0.0) {
        r -= d * A.col(j);
        x[j] = xn;
        biggest = std::max(biggest, std::abs(d));
      }
    }
    if (biggest <= tol * std::max(1.0, x.cwiseAbs().maxCoeff())) break;
  }
  return x;
}

inline MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index m, Eigen::Index n) {
  std::normal_distribution<double> N(0.0, 1.0);
  MatrixXd A(m, n);
  for (Eigen::Index j = 0; j < n; ++j) for (Eigen::Index i = 0; i < m; ++i) A(i, j) = N(rng);
  return A;
}

inline MatrixXd random_nonneg(std::mt19937_64& rng, Eigen::Index m, Eigen::Index n) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  MatrixXd A(m, n);
  for (Eigen::Index j = 0; j < n; ++j) for (Eigen::Index i = 0; i < m; ++i) A(i, j) = U(rng);
  return A;
}

}  // namespace oracle
