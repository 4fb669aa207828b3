#include "cellph/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cellph/errors.hpp"

namespace cellph {

namespace {

// RODAS3 tableau in the K-form of Sandu et al. (KPP):
//   (1/(h g) I - J) K_i = f(y + sum_j a_ij K_j) + sum_j (c_ij / h) K_j
//   y_new = y + sum_i m_i K_i,   err = sum_i e_i K_i
constexpr int kStages = 4;
constexpr double kGamma = 0.5;
constexpr double kTabA[kStages][kStages] = {
    {0, 0, 0, 0},
    {0, 0, 0, 0},
    {2, 0, 0, 0},
    {2, 0, 1, 0},
};
constexpr double kTabC[kStages][kStages] = {
    {0, 0, 0, 0},
    {4, 0, 0, 0},
    {1, -1, 0, 0},
    {1, -1, -8.0 / 3.0, 0},
};
constexpr bool kNewF[kStages] = {true, false, true, true};
constexpr double kTabM[kStages] = {2, 0, 1, 1};
constexpr double kTabE[kStages] = {0, 0, 0, 1};
constexpr double kErrorOrder = 3.0;

constexpr double kSafety = 0.9;
constexpr double kFacMin = 0.2;
constexpr double kFacMax = 6.0;
constexpr double kFacReject = 0.1;

}  // namespace

StepControl StepControl::from(const IntegratorSettings& s, std::vector<double> atol,
                              bool nonnegative) {
  StepControl c;
  c.rtol = s.rtol;
  c.atol = std::move(atol);
  c.initial_step = s.initial_step;
  c.min_step = s.min_step;
  c.max_step = s.max_step;
  c.max_steps = s.max_steps;
  c.nonnegative = nonnegative;
  c.neg_tol = s.neg_tol;
  return c;
}

IntegratorStats integrate_rodas3(StiffSystem& sys, std::vector<double> y,
                                 std::span<const double> times, const StepControl& ctl,
                                 const OutputFn& output) {
  const std::size_t n = sys.size();
  if (y.size() != n) throw IntegrationError("initial state has wrong size");
  if (ctl.atol.size() != n) throw IntegrationError("atol has wrong size");
  if (times.empty()) return {};

  IntegratorStats stats;
  std::vector<std::vector<double>> K(kStages, std::vector<double>(n));
  std::vector<double> f(n), ystage(n), ynew(n), err(n);

  double t = times.front();
  output(0, t, y);
  double h = std::min(ctl.initial_step, ctl.max_step);
  bool last_rejected = false;

  for (std::size_t frame = 1; frame < times.size(); ++frame) {
    const double t_target = times[frame];
    while (t < t_target) {
      if (stats.steps + stats.rejected >= ctl.max_steps) {
        std::ostringstream msg;
        msg << "step budget exhausted at t=" << t << " (steps=" << stats.steps
            << ", rejected=" << stats.rejected << ")";
        throw IntegrationError(msg.str());
      }
      // Land exactly on the output time; the natural step h is kept for later.
      const double remaining = t_target - t;
      const bool clipped = h >= remaining * (1.0 - 1e-12);
      const double hs = clipped ? remaining : h;

      if (!sys.factor(y, 1.0 / (hs * kGamma))) {
        throw IntegrationError("singular iteration matrix at t=" + std::to_string(t));
      }
      ++stats.factorizations;

      for (int i = 0; i < kStages; ++i) {
        if (kNewF[i]) {
          if (i == 0) {
            sys.rhs(y, f);
          } else {
            for (std::size_t k = 0; k < n; ++k) {
              double acc = y[k];
              for (int j = 0; j < i; ++j) acc += kTabA[i][j] * K[j][k];
              ystage[k] = acc;
            }
            sys.rhs(ystage, f);
          }
          ++stats.rhs_evals;
        }
        auto& Ki = K[i];
        for (std::size_t k = 0; k < n; ++k) {
          double acc = f[k];
          for (int j = 0; j < i; ++j) acc += (kTabC[i][j] / hs) * K[j][k];
          Ki[k] = acc;
        }
        sys.solve(Ki);
      }

      double err_sq = 0.0;
      bool finite = true;
      double most_negative = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        double yn = y[k], e = 0.0;
        for (int i = 0; i < kStages; ++i) {
          yn += kTabM[i] * K[i][k];
          e += kTabE[i] * K[i][k];
        }
        ynew[k] = yn;
        if (!std::isfinite(yn)) finite = false;
        const double w = ctl.atol[k] + ctl.rtol * std::max(std::abs(y[k]), std::abs(yn));
        err_sq += (e / w) * (e / w);
        most_negative = std::min(most_negative, yn);
      }
      const double err_norm = finite ? std::sqrt(err_sq / static_cast<double>(n)) : 1e300;
      const bool negative = ctl.nonnegative && most_negative < -ctl.neg_tol;

      if (err_norm <= 1.0 && !negative) {
        t = clipped ? t_target : t + hs;
        if (ctl.nonnegative) {
          for (auto& v : ynew) v = std::max(v, 0.0);
        }
        y.swap(ynew);
        ++stats.steps;
        stats.min_step_taken = stats.steps == 1 ? hs : std::min(stats.min_step_taken, hs);
        stats.max_step_taken = std::max(stats.max_step_taken, hs);
        double fac = kSafety * std::pow(std::max(err_norm, 1e-10), -1.0 / kErrorOrder);
        fac = std::clamp(fac, kFacMin, last_rejected ? 1.0 : kFacMax);
        // A clipped step says nothing about how far the natural step can grow.
        const double h_next = std::min(clipped ? std::max(h, hs * fac) : hs * fac, ctl.max_step);
        h = h_next;
        last_rejected = false;
      } else {
        ++stats.rejected;
        if (negative && err_norm <= 1.0) ++stats.negativity_rejections;
        double fac = finite ? kSafety * std::pow(err_norm, -1.0 / kErrorOrder) : kFacReject;
        fac = std::clamp(fac, kFacReject, 0.5);
        h = hs * fac;
        last_rejected = true;
        if (h < ctl.min_step) {
          std::ostringstream msg;
          msg << "step size underflow at t=" << t << " (h=" << h << ", error norm=" << err_norm
              << ", most negative component=" << most_negative << ")";
          throw IntegrationError(msg.str());
        }
      }
    }
    output(frame, t, y);
  }
  return stats;
}

}  // namespace cellph
