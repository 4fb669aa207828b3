#pragma once

// Three-phase estimation against a prepared bundle:
//   1. identify the subdictionary whose whitened code book explains b best,
//   2. sparse non-negative coding of b on that subdictionary's atoms,
//   3. interpolate the labels of the coded atoms.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cellph/bundle.hpp"
#include "cellph/measure.hpp"

namespace cellph {

enum class Phase1Solver {
  kIas,   // IAS with an inner Morozov-stopped NNLS (default)
  kNnls,  // a single Morozov-stopped projected-CGLS NNLS
};

enum class Interpolation { kNormalized, kRaw };

const char* to_string(Phase1Solver s);
const char* to_string(Interpolation mode);
Phase1Solver parse_phase1_solver(const std::string& text);
Interpolation parse_interpolation(const std::string& text);

struct EstimateOptions {
  Phase1Solver phase1_solver = Phase1Solver::kIas;
  /// Phase 1 IAS. Its inner target is Morozov with T = number of samples.
  double phase1_eta = 1e-3;
  double phase1_tol_theta = 1e-3;
  int phase1_max_iter = 1000;

  /// Phase 2 IAS on D / sigma and b / sigma (noise level sigma); the inner
  /// Morozov target is m, i.e. |b - D x|^2 <= m sigma^2.
  double phase2_eta = 0.03;
  double phase2_tol_theta = 1e-3;
  int phase2_max_iter = 250;
  double phase2_sigma = 1e-5;
  /// Inner CGLS iteration cap per pass; 0 keeps the CGLS default.
  int phase2_inner_max_iter = 0;
  /// Outer iteration at which Phase 2 switches to the inverse-gamma prior; < 0 never.
  int phase2_hybrid_switch = -1;
  /// Phase 2 on (b - mu) and D whitened by the winner's DCE statistics.
  bool phase2_whitened = false;
  /// IasConfig::descent_guard for both phases. Off takes every projected
  /// update as is; the guard can freeze IAS on large collinear code books.
  bool descent_guard = false;

  Interpolation interpolation = Interpolation::kNormalized;
  /// Weights below this fraction of the largest are left out of the reported support.
  double support_rel_tol = 1e-6;
  /// Simulate the forward model at the estimate for overlay plots.
  bool replay = false;
  /// Phase 1 threads; 0 = runtime default, 1 = serial.
  int workers = 0;
};

struct Phase1Row {
  double residual_sq = 0.0;  // whitened, |L^-1 (b - mu - W h)|^2
  int iterations = 0;
  std::string status;
};

struct Phase1Result {
  int winner = -1;
  std::vector<Phase1Row> rows;
  /// Subdictionaries whose residual equals the winner's exactly.
  std::vector<int> ties;
};

struct SupportEntry {
  std::size_t atom = 0;  // global atom index
  ParamVector label;
  double weight = 0.0;
};

struct Phase2Result {
  Vector x;  // one weight per member of the winner, >= 0
  std::vector<SupportEntry> support;  // descending weight
  double residual_sq = 0.0;  // |b - D x|^2, or whitened when phase2_whitened
  int iterations = 0;
  IasStatus status = IasStatus::kMaxIter;
};

struct Phase3Result {
  ParamVector xi_raw;         // sum_j x_j xi_j
  ParamVector xi_normalized;  // sum_j x_j xi_j / sum_j x_j
  double weight_sum = 0.0;
};

struct Timings {
  double phase1 = 0.0, phase2 = 0.0, phase3 = 0.0, replay = 0.0;  // seconds
};

struct EstimationResult {
  Phase1Result phase1;
  Phase2Result phase2;
  Phase3Result phase3;
  Interpolation interpolation = Interpolation::kNormalized;
  /// The reported estimate: phase3.xi_normalized or phase3.xi_raw.
  ParamVector xi;
  /// map_params(xi); unset when the raw estimate lies outside [0, 1]^3.
  std::optional<PhysicalParams> physical;
  /// Forward datum at xi when replay was requested and succeeded.
  std::optional<PhTrace> replay;
  std::string replay_error;
  Timings timings;
};

/// Throws ConfigError when a subdictionary covariance is not SPD and
/// std::invalid_argument on a length mismatch. Ties go to the lowest index.
Phase1Result phase1_identify(const Vector& b, const std::vector<Subdictionary>& subs,
                             const EstimateOptions& options = {});
/// One subdictionary at a time, in index order.
Phase1Result phase1_identify_serial(const Vector& b, const std::vector<Subdictionary>& subs,
                                    const EstimateOptions& options = {});

Phase2Result phase2_code(const Vector& b, const Subdictionary& winner, const Dictionary& dict,
                         const EstimateOptions& options = {});

/// Throws EstimationError when every weight is zero.
Phase3Result phase3_interpolate(const Vector& x, const std::vector<ParamVector>& labels);

/// All three phases. Throws EstimationError when the code is identically zero.
EstimationResult estimate(const PhTrace& datum, const Bundle& bundle, const ForwardConfig& config,
                          const EstimateOptions& options = {});

/// key,value lines plus the residual table and support.
void write_report_text(std::ostream& out, const EstimationResult& r);
/// section,key,value rows covering the same content.
void write_report_csv(std::ostream& out, const EstimationResult& r);
/// t,datum,replay (replay column empty when absent).
void write_overlay_csv(std::ostream& out, const PhTrace& datum, const EstimationResult& r);

}  // namespace cellph
