#include "cellph/banded.hpp"

#include <lapacke.h>

#include <algorithm>
#include <stdexcept>

namespace cellph {

BandedLU::BandedLU(std::size_t n, std::size_t kl, std::size_t ku)
    : n_(n), kl_(kl), ku_(ku), ldab_(2 * kl + ku + 1), ab_(ldab_ * n, 0.0), ipiv_(n, 0) {}

void BandedLU::set_zero() {
  std::fill(ab_.begin(), ab_.end(), 0.0);
  factored_ = false;
}

bool BandedLU::factor() {
  const lapack_int info = LAPACKE_dgbtrf_work(
      LAPACK_COL_MAJOR, static_cast<lapack_int>(n_), static_cast<lapack_int>(n_),
      static_cast<lapack_int>(kl_), static_cast<lapack_int>(ku_), ab_.data(),
      static_cast<lapack_int>(ldab_), ipiv_.data());
  factored_ = info == 0;
  return factored_;
}

void BandedLU::solve(std::span<double> b, std::size_t nrhs) const {
  if (!factored_) throw std::logic_error("BandedLU::solve before successful factor()");
  if (b.size() < n_ * nrhs) throw std::invalid_argument("BandedLU::solve: rhs too short");
  LAPACKE_dgbtrs_work(LAPACK_COL_MAJOR, 'N', static_cast<lapack_int>(n_),
                      static_cast<lapack_int>(kl_), static_cast<lapack_int>(ku_),
                      static_cast<lapack_int>(nrhs), const_cast<double*>(ab_.data()),
                      static_cast<lapack_int>(ldab_), const_cast<int*>(ipiv_.data()), b.data(),
                      static_cast<lapack_int>(n_));
}

}  // namespace cellph
