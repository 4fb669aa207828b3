#include "cellph/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "cellph/errors.hpp"

namespace cellph {

namespace {

constexpr double kDescentSlack = 1e-10;

int pass_cap(const CglsTarget& t, Eigen::Index cols) {
  return t.max_iter > 0 ? t.max_iter : static_cast<int>(4 * cols + 20);
}

// 1/2 |b - A x|^2 + 1/2 |d .* x|^2
double augmented_objective(const Matrix& A, const Vector& b, const Vector& d, const Vector& x) {
  double f = 0.5 * (b - A * x).squaredNorm();
  if (d.size() > 0) f += 0.5 * d.cwiseProduct(x).squaredNorm();
  return f;
}

// argmin over t in [0, 1] of the augmented objective at x0 + t (x1 - x0).
double segment_minimizer(const Matrix& A, const Vector& b, const Vector& d, const Vector& x0, const Vector& x1) {
  const Vector step = x1 - x0;
  const Vector Ad = A * step;
  const Vector ds = d.cwiseProduct(step);
  const double slope = -(b - A * x0).dot(Ad) + d.cwiseProduct(x0).dot(ds);
  const double curvature = Ad.squaredNorm() + ds.squaredNorm();
  if (!(curvature > 0.0) || slope >= 0.0) return 0.0;
  return std::min(1.0, -slope / curvature);
}

Vector default_theta_scales(const Matrix& A, double scale) {
  Vector v(A.cols());
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    const double n2 = A.col(j).squaredNorm();
    v[j] = n2 > 0.0 ? scale / n2 : scale;
  }
  return v;
}

double prior_objective(const Vector& x, const Vector& theta, const Vector& vartheta, double eta,
                       bool inverse_gamma, double kappa) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    acc += inverse_gamma ? inverse_gamma_prior_energy(x[j], theta[j], kappa * eta * vartheta[j], kappa)
                         : gamma_prior_energy(x[j], theta[j], vartheta[j], eta);
  }
  return acc;
}

IasResult run_ias(const Matrix& A, const Vector& b, IasConfig cfg, int switch_iter) {
  if (b.size() != A.rows()) throw std::invalid_argument("ias: b has wrong length");
  if (cfg.theta_scales.size() == 0) cfg.theta_scales = default_theta_scales(A, cfg.theta_scale);
  cfg.validate(A.cols());
  const Vector& vt = cfg.theta_scales;
  const double kappa = cfg.ig_beta + 1.5;

  IasResult res;
  res.vartheta = vt;
  res.x = cfg.x0.size() == 0 ? Vector(Vector::Zero(A.cols())) : cfg.x0;
  res.theta = cfg.eta * vt;
  auto& diag = res.diagnostics;

  auto objective = [&](bool ig) {
    return 0.5 * (b - A * res.x).squaredNorm() +
           prior_objective(res.x, res.theta, vt, cfg.eta, ig, kappa);
  };
  bool prev_ig = switch_iter == 0;
  double e_prev = objective(prev_ig);
  diag.objective.push_back(e_prev);
  diag.inverse_gamma.push_back(prev_ig);

  for (int k = 0; k < cfg.max_iter; ++k) {
    const bool ig = switch_iter >= 0 && k >= switch_iter;
    if (ig && diag.switched_at < 0) diag.switched_at = k;

    const Vector d = res.theta.cwiseSqrt().cwiseInverse();
    const Vector start = cfg.warm_start ? res.x : Vector();
    NnlsResult nn = nnls_cgls(A, b, cfg.inner, start, d);
    if (!cfg.descent_guard || augmented_objective(A, b, d, nn.x) <= augmented_objective(A, b, d, res.x)) {
      res.x = std::move(nn.x);
    } else {
      res.x += segment_minimizer(A, b, d, res.x, nn.x) * (nn.x - res.x);
    }

    Vector theta_new(res.theta.size());
    for (Eigen::Index j = 0; j < theta_new.size(); ++j) {
      theta_new[j] = ig ? theta_update_inverse_gamma(res.x[j], kappa * cfg.eta * vt[j], kappa)
                        : theta_update_gamma(res.x[j], vt[j], cfg.eta, cfg.theta_formula);
    }
    const double change = (theta_new - res.theta).norm() / theta_new.norm();
    res.theta = std::move(theta_new);

    const double e = objective(ig);
    if (cfg.descent_guard && !ig && !prev_ig && cfg.theta_formula == ThetaFormula::kStationary &&
        e > e_prev + kDescentSlack * std::max(1.0, std::abs(e_prev))) {
      throw InternalError("ias: gamma objective increased from " + std::to_string(e_prev) +
                          " to " + std::to_string(e) + " at iteration " + std::to_string(k));
    }
    e_prev = e;
    prev_ig = ig;
    diag.objective.push_back(e);
    diag.inverse_gamma.push_back(ig);
    diag.theta_change.push_back(change);
    diag.support.push_back(support_size(res.x));
    diag.inner_iterations.push_back(nn.iterations);
    diag.inner_status.push_back(nn.status);
    res.iterations = k + 1;
    if (change < cfg.tol_theta) {
      res.status = IasStatus::kConverged;
      break;
    }
  }
  res.residual_sq = (b - A * res.x).squaredNorm();
  return res;
}

}  // namespace

CglsTarget CglsTarget::morozov(double T) {
  CglsTarget t;
  t.discrepancy = T;
  return t;
}

CglsTarget CglsTarget::sigma(double sigma, Eigen::Index rows) {
  return morozov(static_cast<double>(rows) * sigma * sigma);
}

CglsTarget CglsTarget::iterations(int n) {
  CglsTarget t;
  t.grad_tol = 0.0;
  t.max_iter = n;
  return t;
}

CglsResult cgls(const Matrix& A, const Vector& b, const Vector& prior_diag, const Vector& x0,
                const CglsTarget& target) {
  const Eigen::Index p = A.cols();
  const bool prior = prior_diag.size() > 0;
  if (prior && prior_diag.size() != p) throw std::invalid_argument("cgls: prior_diag size");
  if (x0.size() != p) throw std::invalid_argument("cgls: x0 size");

  CglsResult out;
  out.x = x0;
  Vector rd = b - A * out.x;
  Vector rp = prior ? Vector(-prior_diag.cwiseProduct(out.x)) : Vector();
  out.data_residual_sq = rd.squaredNorm();
  const bool use_disc = target.discrepancy >= 0.0;
  if (use_disc && out.data_residual_sq <= target.discrepancy) {
    out.stop = CglsStop::kDiscrepancy;
    return out;
  }

  Vector s = A.transpose() * rd;
  if (prior) s += prior_diag.cwiseProduct(rp);
  Vector dir = s;
  double gamma = s.squaredNorm();
  const double stop_grad = target.grad_tol * std::sqrt(gamma);
  if (gamma == 0.0) return out;

  const int cap = pass_cap(target, p);
  Vector qd(A.rows()), qp;
  while (out.iterations < cap) {
    qd.noalias() = A * dir;
    double delta = qd.squaredNorm();
    if (prior) {
      qp = prior_diag.cwiseProduct(dir);
      delta += qp.squaredNorm();
    }
    if (!(delta > 0.0)) return out;
    const double alpha = gamma / delta;
    out.x += alpha * dir;
    rd -= alpha * qd;
    if (prior) rp -= alpha * qp;
    ++out.iterations;
    out.data_residual_sq = rd.squaredNorm();
    if (use_disc && out.data_residual_sq <= target.discrepancy) {
      out.stop = CglsStop::kDiscrepancy;
      return out;
    }
    s.noalias() = A.transpose() * rd;
    if (prior) s += prior_diag.cwiseProduct(rp);
    const double gamma_new = s.squaredNorm();
    if (std::sqrt(gamma_new) <= stop_grad) {
      out.stop = CglsStop::kConverged;
      return out;
    }
    dir = s + (gamma_new / gamma) * dir;
    gamma = gamma_new;
  }
  out.stop = CglsStop::kIterationCap;
  return out;
}

const char* to_string(NnlsStatus s) {
  switch (s) {
    case NnlsStatus::kTargetReached: return "target_reached";
    case NnlsStatus::kConverged: return "converged";
    case NnlsStatus::kTargetUnreachable: return "target_unreachable";
    case NnlsStatus::kIterationCap: return "iteration_cap";
  }
  return "?";
}

NnlsResult nnls_cgls(const Matrix& A, const Vector& b, const CglsTarget& target, const Vector& x0,
                     const Vector& prior_diag) {
  if (A.rows() != b.size()) throw std::invalid_argument("nnls_cgls: b has wrong length");
  if (A.cols() == 0) throw std::invalid_argument("nnls_cgls: empty matrix");
  const Vector start = x0.size() == 0 ? Vector(Vector::Zero(A.cols())) : x0;

  CglsResult first = cgls(A, b, prior_diag, start, target);
  Vector x1 = first.x.cwiseMax(0.0);
  CglsResult second = cgls(A, b, prior_diag, x1, target);

  NnlsResult out;
  out.x = second.x.cwiseMax(0.0);
  out.iterations = first.iterations + second.iterations;
  out.residual_sq = (b - A * out.x).squaredNorm();

  if (target.discrepancy >= 0.0) {
    if (out.residual_sq <= target.discrepancy) {
      out.status = NnlsStatus::kTargetReached;
    } else {
      out.status = NnlsStatus::kTargetUnreachable;
      if (augmented_objective(A, b, prior_diag, x1) < augmented_objective(A, b, prior_diag, out.x)) {
        out.x = std::move(x1);
        out.residual_sq = (b - A * out.x).squaredNorm();
      }
    }
  } else {
    out.status = second.stop == CglsStop::kIterationCap ? NnlsStatus::kIterationCap
                                                        : NnlsStatus::kConverged;
  }
  return out;
}

NnlsResult nnls_active_set(const Matrix& A, const Vector& b) {
  if (A.rows() != b.size()) throw std::invalid_argument("nnls_active_set: b has wrong length");
  if (A.cols() == 0) throw std::invalid_argument("nnls_active_set: empty matrix");
  const Eigen::Index n = A.cols();
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() *
                     static_cast<double>(std::max(A.rows(), n)) * A.cwiseAbs().colwise().sum().maxCoeff() *
                     std::max(b.cwiseAbs().maxCoeff(), 1.0);
  std::vector<char> passive(static_cast<std::size_t>(n), 0);
  Vector x = Vector::Zero(n);

  // Unconstrained least squares on the passive columns, zero elsewhere.
  auto passive_solution = [&] {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
    }
    Matrix Ap(A.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) Ap.col(static_cast<Eigen::Index>(k)) = A.col(cols[k]);
    const Vector zp = Ap.colPivHouseholderQr().solve(b);
    Vector z = Vector::Zero(n);
    for (std::size_t k = 0; k < cols.size(); ++k) z[cols[k]] = zp[static_cast<Eigen::Index>(k)];
    return z;
  };

  NnlsResult out;
  out.status = NnlsStatus::kIterationCap;
  const int max_outer = 3 * static_cast<int>(n);
  for (int outer = 0; outer < max_outer; ++outer) {
    const Vector w = A.transpose() * (b - A * x);
    Eigen::Index enter = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w[j] > best) {
        best = w[j];
        enter = j;
      }
    }
    if (enter < 0) {
      out.status = NnlsStatus::kConverged;
      break;
    }
    passive[static_cast<std::size_t>(enter)] = 1;
    ++out.iterations;
    for (;;) {
      const Vector z = passive_solution();
      double alpha = 1.0;
      Eigen::Index block = -1;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) {
          const double a = x[j] / (x[j] - z[j]);
          if (block < 0 || a < alpha) {
            alpha = a;
            block = j;
          }
        }
      }
      if (block < 0) {
        x = z;
        break;
      }
      // Step to the boundary; the blocking column and any others at it leave.
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && (j == block || x[j] <= tol)) {
          passive[static_cast<std::size_t>(j)] = 0;
          x[j] = 0.0;
        }
      }
    }
  }
  out.x = x.cwiseMax(0.0);
  out.residual_sq = (b - A * out.x).squaredNorm();
  return out;
}

double theta_update_gamma(double x, double vartheta, double eta, ThetaFormula formula) {
  const double q = formula == ThetaFormula::kStationary ? 2.0 * x * x / vartheta
                                                        : x * x / (4.0 * vartheta);
  return 0.5 * vartheta * (eta + std::sqrt(eta * eta + q));
}

double theta_update_inverse_gamma(double x, double vartheta_ig, double kappa) {
  return (vartheta_ig + 0.5 * x * x) / kappa;
}

double gamma_prior_energy(double x, double theta, double vartheta, double eta) {
  return x * x / (2.0 * theta) - eta * std::log(theta) + theta / vartheta;
}

double inverse_gamma_prior_energy(double x, double theta, double vartheta_ig, double kappa) {
  return (0.5 * x * x + vartheta_ig) / theta + kappa * std::log(theta);
}

void IasConfig::validate(Eigen::Index cols) const {
  if (!(eta > 0.0)) throw std::invalid_argument("ias: eta must be > 0");
  if (!(max_iter >= 1)) throw std::invalid_argument("ias: max_iter must be >= 1");
  if (!(tol_theta >= 0.0)) throw std::invalid_argument("ias: tol_theta must be >= 0");
  if (!(ig_beta > -1.5)) throw std::invalid_argument("ias: ig_beta must exceed -3/2");
  if (theta_scales.size() == 0) {
    if (!(theta_scale > 0.0)) throw std::invalid_argument("ias: theta_scale must be > 0");
  } else {
    if (theta_scales.size() != cols) throw std::invalid_argument("ias: theta_scales size");
    if (!(theta_scales.minCoeff() > 0.0)) throw std::invalid_argument("ias: vartheta must be > 0");
  }
  if (x0.size() != 0 && (x0.size() != cols || !(x0.minCoeff() >= 0.0))) {
    throw std::invalid_argument("ias: x0 must be empty or a non-negative vector of length cols");
  }
}

const char* to_string(IasStatus s) {
  return s == IasStatus::kConverged ? "converged" : "max_iter";
}

IasResult ias(const Matrix& A, const Vector& b, IasConfig config) {
  return run_ias(A, b, std::move(config), -1);
}

IasResult ias_hybrid(const Matrix& A, const Vector& b, const IasConfig& config) {
  return run_ias(A, b, config, config.hybrid_switch_iter);
}

double gamma_objective(const Matrix& A, const Vector& b, const Vector& x, const Vector& theta,
                       const Vector& vartheta, double eta) {
  return 0.5 * (b - A * x).squaredNorm() + prior_objective(x, theta, vartheta, eta, false, 0.0);
}

int support_size(const Vector& x, double rel_tol) {
  if (x.size() == 0) return 0;
  const double cut = rel_tol * x.maxCoeff();
  if (!(cut > 0.0)) return 0;
  int n = 0;
  for (Eigen::Index j = 0; j < x.size(); ++j) n += x[j] > cut ? 1 : 0;
  return n;
}

void write_ias_diagnostics_csv(std::ostream& out, const IasDiagnostics& d) {
  out << "iteration,objective,theta_change,support,inner_iterations,inner_status,prior\n";
  out.precision(17);
  for (std::size_t k = 0; k < d.objective.size(); ++k) {
    out << k << ',' << d.objective[k] << ',';
    if (k > 0) {
      out << d.theta_change[k - 1] << ',' << d.support[k - 1] << ',' << d.inner_iterations[k - 1]
          << ',' << to_string(d.inner_status[k - 1]);
    } else {
      out << ",,,";
    }
    out << ',' << (d.inverse_gamma[k] ? "inverse_gamma" : "gamma") << '\n';
  }
}

}  // namespace cellph
