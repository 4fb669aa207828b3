#pragma once

// Adaptive linearly implicit (Rosenbrock) integration of stiff ODE systems
// y' = f(y). The method is RODAS3: four stages, order 3 with an embedded
// order-2 error estimate, L-stable and stiffly accurate.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cellph/config.hpp"

namespace cellph {

/// Autonomous stiff system. factor() prepares (sigma I - J(y))^{-1}, which
/// solve() then applies in place.
class StiffSystem {
 public:
  virtual ~StiffSystem() = default;
  virtual std::size_t size() const = 0;
  virtual void rhs(std::span<const double> y, std::span<double> f) const = 0;
  /// Returns false if the shifted Jacobian is singular.
  virtual bool factor(std::span<const double> y, double sigma) = 0;
  virtual void solve(std::span<double> v) const = 0;
};

struct IntegratorStats {
  long steps = 0;
  long rejected = 0;
  long negativity_rejections = 0;
  long rhs_evals = 0;
  long factorizations = 0;
  double min_step_taken = 0.0;
  double max_step_taken = 0.0;
};

struct StepControl {
  double rtol = 1e-6;
  std::vector<double> atol;  // per component
  double initial_step = 1e-6;
  double min_step = 1e-13;
  double max_step = 0.5;
  long max_steps = 2'000'000;
  bool nonnegative = false;  // clamp / reject undershoots below zero
  double neg_tol = 1e-10;

  static StepControl from(const IntegratorSettings& s, std::vector<double> atol,
                          bool nonnegative);
};

/// Called at every output time (including the first) with the frame index.
using OutputFn = std::function<void(std::size_t frame, double t, std::span<const double> y)>;

/// Integrates from output_times.front() through output_times.back(), landing
/// exactly on every output time. Throws IntegrationError when the step size
/// underflows, the step budget is exhausted, or the system turns singular.
IntegratorStats integrate_rodas3(StiffSystem& system, std::vector<double> y,
                                 std::span<const double> output_times, const StepControl& control,
                                 const OutputFn& output);

}  // namespace cellph
