#pragma once

// Non-negative least squares by projected CGLS, and the IAS (iterative
// alternating sequential) MAP solver for the conditionally Gaussian model
//   x_j | theta_j ~ N(0, theta_j),  theta_j ~ hyperprior,  x >= 0.
//
// Gamma hyperprior, eta = beta - 3/2:
//   E(x, theta) = 1/2 |b - A x|^2 + sum_j [ x_j^2 / (2 theta_j) - eta log theta_j
//                                           + theta_j / vartheta_j ]
// Inverse gamma, kappa = beta_ig + 3/2:
//   E(x, theta) = 1/2 |b - A x|^2 + sum_j [ (x_j^2 / 2 + vartheta_ig_j) / theta_j
//                                           + kappa log theta_j ]

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

namespace cellph {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// When a CGLS pass stops. All enabled criteria are checked every iteration.
struct CglsTarget {
  /// Stop once |b - A x|^2 <= discrepancy (data rows only). Negative disables.
  double discrepancy = -1.0;
  /// Stop once |grad| <= grad_tol * |grad at start|.
  double grad_tol = 1e-12;
  /// Iteration cap per pass; 0 means 4 * cols + 20.
  int max_iter = 0;

  /// Morozov level T on the squared residual.
  static CglsTarget morozov(double T);
  /// Residual standard deviation sigma over m rows, i.e. T = m sigma^2.
  static CglsTarget sigma(double sigma, Eigen::Index rows);
  static CglsTarget iterations(int n);
};

enum class CglsStop { kDiscrepancy, kConverged, kIterationCap };

struct CglsResult {
  Vector x;
  double data_residual_sq = 0.0;
  int iterations = 0;
  CglsStop stop = CglsStop::kConverged;
};

/// CGLS on min |b - A x|^2 + |d .* x|^2 started from x0. `prior_diag` may be
/// empty, which drops the second block.
CglsResult cgls(const Matrix& A, const Vector& b, const Vector& prior_diag, const Vector& x0,
                const CglsTarget& target);

enum class NnlsStatus {
  kTargetReached,     // discrepancy met after the final projection
  kConverged,         // no discrepancy requested; gradient criterion met
  kTargetUnreachable, // discrepancy requested but not met; best iterate returned
  kIterationCap,      // a pass ran out of iterations
};

const char* to_string(NnlsStatus s);

struct NnlsResult {
  Vector x;  // >= 0 componentwise, exactly
  double residual_sq = 0.0;  // |b - A x|^2 at the returned x
  int iterations = 0;        // summed over both passes
  NnlsStatus status = NnlsStatus::kConverged;
};

/// Two CGLS passes, each followed by projection onto x >= 0; the second pass
/// restarts from the projected first solution. With `x0` empty the first pass
/// starts from 0. `prior_diag` as in cgls().
NnlsResult nnls_cgls(const Matrix& A, const Vector& b, const CglsTarget& target = {},
                     const Vector& x0 = Vector(), const Vector& prior_diag = Vector());

/// Exact NNLS by the Lawson-Hanson active-set method. For small, dense
/// problems such as code-book fits. Status kIterationCap if the outer loop
/// hits 3 * cols iterations, kConverged otherwise.
NnlsResult nnls_active_set(const Matrix& A, const Vector& b);

enum class ThetaFormula {
  kStationary,  // root of dE/dtheta = 0: (v/2)(eta + sqrt(eta^2 + 2 x^2 / v))
  kPrinted,     // compatibility: (v/2)(eta + sqrt(eta^2 + x^2 / (4 v)))
};

/// Gamma-hyperprior theta update for one component.
double theta_update_gamma(double x, double vartheta, double eta,
                          ThetaFormula formula = ThetaFormula::kStationary);
/// Inverse-gamma theta update: (vartheta_ig + x^2 / 2) / kappa.
double theta_update_inverse_gamma(double x, double vartheta_ig, double kappa);

/// Per-component prior energies (the bracketed terms of E above).
double gamma_prior_energy(double x, double theta, double vartheta, double eta);
double inverse_gamma_prior_energy(double x, double theta, double vartheta_ig, double kappa);

struct IasConfig {
  double eta = 1e-3;
  /// vartheta_j. Empty means vartheta_j = theta_scale / |a_j|^2 (zero columns
  /// get theta_scale).
  Vector theta_scales;
  double theta_scale = 1.0;
  double tol_theta = 1e-3;  // on |theta_new - theta| / |theta_new|
  int max_iter = 1000;
  /// Outer iteration from which the inverse-gamma update is used; < 0 never.
  int hybrid_switch_iter = -1;
  /// Inverse-gamma shape; its scale is kappa eta vartheta_j, so both
  /// hyperpriors share the x = 0 fixed point theta_j = eta vartheta_j.
  double ig_beta = 1.0;
  ThetaFormula theta_formula = ThetaFormula::kStationary;
  CglsTarget inner;
  /// Start each x-update from the previous x instead of 0.
  bool warm_start = false;
  /// Starting x (>= 0); empty means 0. theta always starts at eta vartheta.
  Vector x0;
  /// When the projected update raises the x-objective, step to the minimizer
  /// on the segment from the previous x instead. Off: always take the update.
  bool descent_guard = true;

  /// Throws std::invalid_argument.
  void validate(Eigen::Index cols) const;
};

enum class IasStatus { kConverged, kMaxIter };

const char* to_string(IasStatus s);

struct IasDiagnostics {
  // One entry per outer iteration; objective[0] is the starting point.
  std::vector<double> objective;
  std::vector<double> theta_change;
  std::vector<int> support;
  std::vector<int> inner_iterations;
  std::vector<NnlsStatus> inner_status;
  std::vector<bool> inverse_gamma;
  int switched_at = -1;
};

struct IasResult {
  Vector x;
  Vector theta;
  Vector vartheta;
  IasStatus status = IasStatus::kMaxIter;
  int iterations = 0;
  double residual_sq = 0.0;
  IasDiagnostics diagnostics;
};

/// Gamma hyperprior throughout. With descent_guard an x-update that would
/// raise the x-objective is replaced by the best point on the segment from the
/// previous x, so E never increases; an increase beyond 1e-10 (relative)
/// throws InternalError.
IasResult ias(const Matrix& A, const Vector& b, IasConfig config);
/// Gamma hyperprior until hybrid_switch_iter, inverse gamma afterwards.
IasResult ias_hybrid(const Matrix& A, const Vector& b, const IasConfig& config);

/// Gamma objective E(x, theta).
double gamma_objective(const Matrix& A, const Vector& b, const Vector& x, const Vector& theta,
                       const Vector& vartheta, double eta);

/// Components with x_j > rel_tol * max(x).
int support_size(const Vector& x, double rel_tol = 1e-6);

/// iteration,objective,theta_change,support,inner_iterations,inner_status,prior
void write_ias_diagnostics_csv(std::ostream& out, const IasDiagnostics& d);

}  // namespace cellph
