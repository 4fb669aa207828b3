#pragma once

// Dictionary compression error (DCE): the residual e = d - W h between a
// perturbed forward datum d and its best non-negative code-book fit W h.
// Its sample mean and (regularized) covariance whiten the identification
// residuals.

#include <cstdint>

#include "cellph/dictionary.hpp"
#include "cellph/sparse.hpp"

namespace cellph {

enum class DceMode { kFull, kDiagonal };

const char* to_string(DceMode mode);
DceMode parse_dce_mode(const std::string& text);

struct DceOptions {
  int samples = 500;
  DceMode mode = DceMode::kDiagonal;
  std::uint64_t seed = 1;
  /// Draws per sample before the forward failure is reported.
  int max_retries = 10;
  /// Ridge delta = max(ridge_rel * trace(C) / m, ridge_floor).
  double ridge_rel = 1e-6;
  double ridge_floor = 1e-12;
  int workers = 0;  // OpenMP threads; 0 = runtime default
};

struct DceStats {
  DceMode mode = DceMode::kDiagonal;
  Vector mu;          // m
  Matrix cov;         // m x m (full) or m x 1 (diagonal), ridge included
  double ridge = 0.0;
  int samples = 0;
  int redraws = 0;    // forward failures that were redrawn
};

/// Mean and covariance of the columns of E (m x K, K >= 2) plus the ridge.
DceStats dce_from_samples(const Matrix& E, DceMode mode, double ridge_rel = 1e-6,
                          double ridge_floor = 1e-12);

/// Parameter point of DCE sample `sample` (attempt `attempt`) for the
/// subdictionary numbered `stream`: a member label perturbed by s_a * spacing_a
/// per axis, s_a ~ U[-1/2, 1/2] independently, clamped into the grid box.
/// Depends only on its arguments, so samples can be drawn in any order.
ParamVector dce_sample_point(const Dictionary& dict, const std::vector<std::size_t>& members,
                             std::uint64_t seed, std::uint64_t stream, int sample, int attempt);

/// Draws options.samples perturbed data in parallel (fixed output slots),
/// fits each by exact NNLS on W, and summarizes the residuals.
/// Throws IntegrationError when a sample exhausts its retries.
DceStats estimate_dce(const Dictionary& dict, const std::vector<std::size_t>& members,
                      const Matrix& W, const ForwardConfig& config, const DceOptions& options,
                      std::uint64_t stream);

/// Single-threaded reference for estimate_dce().
DceStats estimate_dce_serial(const Dictionary& dict, const std::vector<std::size_t>& members,
                             const Matrix& W, const ForwardConfig& config,
                             const DceOptions& options, std::uint64_t stream);

/// Applies C^{-1/2} in the Cholesky sense: v -> L^{-1} v with C = L L^T.
class Whitener {
 public:
  Whitener() = default;
  /// Throws ConfigError when C is not positive definite.
  explicit Whitener(const DceStats& stats);

  Vector apply(const Vector& v) const;
  Matrix apply(const Matrix& M) const;
  Eigen::Index size() const { return n_; }

 private:
  DceMode mode_ = DceMode::kDiagonal;
  Eigen::Index n_ = 0;
  Vector inv_sd_;
  Matrix L_;
};

}  // namespace cellph
