#include "cellph/dce.hpp"

#include <algorithm>
#include <mutex>
#include <random>
#include <sstream>

#include <omp.h>

#include "cellph/errors.hpp"
#include "cellph/measure.hpp"

namespace cellph {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// One residual sample; retries with fresh draws on forward failure.
Vector draw_residual(const Dictionary& dict, const std::vector<std::size_t>& members,
                     const Matrix& W, const ForwardConfig& config, const DceOptions& o,
                     std::uint64_t stream, int sample, int& redraws) {
  std::string last_error;
  for (int attempt = 0; attempt <= o.max_retries; ++attempt) {
    const ParamVector xi = dce_sample_point(dict, members, o.seed, stream, sample, attempt);
    try {
      const PhTrace d = synthesize_datum(config, xi);
      const Vector dv = Eigen::Map<const Vector>(d.values.data(), static_cast<Eigen::Index>(d.size()));
      const NnlsResult fit = nnls_active_set(W, dv);
      return dv - W * fit.x;
    } catch (const std::exception& e) {
      last_error = e.what();
      ++redraws;
    }
  }
  std::ostringstream msg;
  msg << "DCE sample " << sample << " of subdictionary " << stream << " failed after "
      << o.max_retries + 1 << " draws: " << last_error;
  throw IntegrationError(msg.str());
}

void check_inputs(const std::vector<std::size_t>& members, const Matrix& W, const Dictionary& dict,
                  const DceOptions& o) {
  if (members.empty()) throw std::invalid_argument("estimate_dce: empty subdictionary");
  if (o.samples < 2) throw std::invalid_argument("estimate_dce: need at least 2 samples");
  if (W.rows() != dict.atoms.rows()) throw std::invalid_argument("estimate_dce: W row count");
}

}  // namespace

const char* to_string(DceMode mode) { return mode == DceMode::kFull ? "full" : "diagonal"; }

DceMode parse_dce_mode(const std::string& text) {
  if (text == "full") return DceMode::kFull;
  if (text == "diagonal" || text == "diag") return DceMode::kDiagonal;
  throw ConfigError("unknown DCE mode '" + text + "' (expected full or diagonal)");
}

DceStats dce_from_samples(const Matrix& E, DceMode mode, double ridge_rel, double ridge_floor) {
  if (E.cols() < 2) throw std::invalid_argument("dce_from_samples: need at least 2 samples");
  const Eigen::Index m = E.rows();
  const double denom = static_cast<double>(E.cols() - 1);
  DceStats s;
  s.mode = mode;
  s.samples = static_cast<int>(E.cols());
  s.mu = E.rowwise().mean();
  const Matrix centered = E.colwise() - s.mu;
  if (mode == DceMode::kFull) {
    s.cov = centered * centered.transpose() / denom;
    s.cov = 0.5 * (s.cov + s.cov.transpose());  // exact symmetry
  } else {
    s.cov = centered.rowwise().squaredNorm() / denom;
  }
  const double trace = mode == DceMode::kFull ? s.cov.trace() : s.cov.sum();
  s.ridge = std::max(ridge_rel * trace / static_cast<double>(m), ridge_floor);
  if (mode == DceMode::kFull) {
    s.cov.diagonal().array() += s.ridge;
  } else {
    s.cov.array() += s.ridge;
  }
  return s;
}

ParamVector dce_sample_point(const Dictionary& dict, const std::vector<std::size_t>& members,
                             std::uint64_t seed, std::uint64_t stream, int sample, int attempt) {
  std::uint64_t key = splitmix64(seed);
  key = splitmix64(key ^ stream);
  key = splitmix64(key ^ static_cast<std::uint64_t>(sample));
  key = splitmix64(key ^ static_cast<std::uint64_t>(attempt));
  std::mt19937_64 rng(key);
  std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
  std::uniform_real_distribution<double> s(-0.5, 0.5);
  ParamVector xi = dict.labels[members[pick(rng)]];
  for (int a = 0; a < 3; ++a) set_component(xi, a, component(xi, a) + s(rng) * dict.grid.spacing(a));
  return dict.grid.clamp(xi);
}

DceStats estimate_dce(const Dictionary& dict, const std::vector<std::size_t>& members,
                      const Matrix& W, const ForwardConfig& config, const DceOptions& options,
                      std::uint64_t stream) {
  check_inputs(members, W, dict, options);
  Matrix E(dict.atoms.rows(), options.samples);
  int redraws = 0;
  std::string error;
  std::mutex error_mutex;
  const int threads = options.workers > 0 ? options.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) reduction(+ : redraws)
  for (int k = 0; k < options.samples; ++k) {
    try {
      E.col(k) = draw_residual(dict, members, W, config, options, stream, k, redraws);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw IntegrationError(error);
  DceStats s = dce_from_samples(E, options.mode, options.ridge_rel, options.ridge_floor);
  s.redraws = redraws;
  return s;
}

DceStats estimate_dce_serial(const Dictionary& dict, const std::vector<std::size_t>& members,
                             const Matrix& W, const ForwardConfig& config,
                             const DceOptions& options, std::uint64_t stream) {
  check_inputs(members, W, dict, options);
  Matrix E(dict.atoms.rows(), options.samples);
  int redraws = 0;
  for (int k = 0; k < options.samples; ++k) {
    E.col(k) = draw_residual(dict, members, W, config, options, stream, k, redraws);
  }
  DceStats s = dce_from_samples(E, options.mode, options.ridge_rel, options.ridge_floor);
  s.redraws = redraws;
  return s;
}

Whitener::Whitener(const DceStats& stats) : mode_(stats.mode), n_(stats.mu.size()) {
  if (mode_ == DceMode::kDiagonal) {
    if (stats.cov.size() != n_ || !(stats.cov.minCoeff() > 0.0)) {
      throw ConfigError("DCE covariance is not positive definite");
    }
    inv_sd_ = stats.cov.col(0).cwiseSqrt().cwiseInverse();
  } else {
    if (stats.cov.rows() != n_ || stats.cov.cols() != n_) throw ConfigError("DCE covariance shape");
    Eigen::LLT<Matrix> llt(stats.cov);
    if (llt.info() != Eigen::Success) throw ConfigError("DCE covariance Cholesky failed");
    L_ = llt.matrixL();
  }
}

Vector Whitener::apply(const Vector& v) const {
  if (mode_ == DceMode::kDiagonal) return v.cwiseProduct(inv_sd_);
  return L_.triangularView<Eigen::Lower>().solve(v);
}

Matrix Whitener::apply(const Matrix& M) const {
  if (mode_ == DceMode::kDiagonal) return inv_sd_.asDiagonal() * M;
  return L_.triangularView<Eigen::Lower>().solve(M);
}

}  // namespace cellph
