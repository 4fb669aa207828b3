#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cellph {

/// General banded matrix with LU factorization (partial pivoting, LAPACK
/// gbtrf/gbtrs). Storage is LAPACK band layout with room for fill-in.
class BandedLU {
 public:
  BandedLU() = default;
  BandedLU(std::size_t n, std::size_t kl, std::size_t ku);

  std::size_t size() const { return n_; }
  std::size_t lower() const { return kl_; }
  std::size_t upper() const { return ku_; }

  void set_zero();
  /// Entry (i, j); |i - j| must lie inside the band.
  double& at(std::size_t i, std::size_t j) { return ab_[(kl_ + ku_ + i - j) + ldab_ * j]; }
  double at(std::size_t i, std::size_t j) const { return ab_[(kl_ + ku_ + i - j) + ldab_ * j]; }

  /// Factors in place. Returns false if the matrix is singular.
  bool factor();
  /// Solves A X = B for column-major B with `nrhs` columns.
  void solve(std::span<double> b, std::size_t nrhs = 1) const;

 private:
  std::size_t n_ = 0, kl_ = 0, ku_ = 0, ldab_ = 0;
  std::vector<double> ab_;
  std::vector<int> ipiv_;
  bool factored_ = false;
};

}  // namespace cellph
