#pragma once

// Non-negative matrix factorization D ~ W H by alternating non-negative least
// squares. Each column (or row) subproblem is solved with IAS under a weak
// gamma prior, then refined by CGLS restricted to its free set, since a
// projected unconstrained solution stalls once constraints become active.

#include <cstdint>
#include <vector>

#include "cellph/sparse.hpp"

namespace cellph {

struct NmfOptions {
  int max_sweeps = 200;
  /// Stop when a sweep lowers the objective by less than this fraction.
  double stagnation_tol = 1e-8;
  std::uint64_t seed = 1;
  /// Subproblem solver. The defaults make the prior negligible next to the
  /// misfit (vartheta_j = 1e8 / |a_j|^2), so IAS acts as a regularized NNLS.
  IasConfig ias = default_ias();

  static IasConfig default_ias();
};

struct NmfResult {
  Matrix W;  // m x k, >= 0, unit-norm columns
  Matrix H;  // k x n, >= 0
  /// 1/2 |D - W H|_F^2 at the start and after every half sweep.
  std::vector<double> objective;
  int sweeps = 0;
  bool converged = false;  // stagnation reached before max_sweeps

  double relative_error(const Matrix& D) const;
};

/// Every column (H step) and row (W step) update is kept only if it does not
/// increase that column's or row's misfit, so the objective never increases.
/// Throws std::invalid_argument on negative D or rank outside [1, min(m, n)].
NmfResult nmf(const Matrix& D, int rank, const NmfOptions& options = {});

/// Singular values, descending.
Vector singular_values(const Matrix& D);

/// Smallest k with sigma_{k+1} / sigma_1 < threshold, at most min(m, n) - 1
/// and at least 1.
int select_rank(const Matrix& D, double threshold = 1e-3);

}  // namespace cellph
