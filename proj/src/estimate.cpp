#include "cellph/estimate.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>

#include <omp.h>

#include "cellph/errors.hpp"

namespace cellph {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

Phase1Row identify_one(const Vector& b, const Subdictionary& s, const EstimateOptions& o) {
  if (s.whitener.size() != b.size()) {
    throw ConfigError("subdictionary whitener has not been prepared for this data length");
  }
  const Matrix A = s.whitener.apply(s.W);
  const Vector r = s.whitener.apply(Vector(b - s.dce.mu));
  const CglsTarget target = CglsTarget::morozov(static_cast<double>(b.size()));
  Phase1Row row;
  if (o.phase1_solver == Phase1Solver::kNnls) {
    const NnlsResult f = nnls_cgls(A, r, target);
    row.residual_sq = f.residual_sq;
    row.iterations = f.iterations;
    row.status = to_string(f.status);
  } else {
    IasConfig c;
    c.eta = o.phase1_eta;
    c.tol_theta = o.phase1_tol_theta;
    c.max_iter = o.phase1_max_iter;
    c.inner = target;
    c.descent_guard = o.descent_guard;
    const IasResult f = ias(A, r, c);
    row.residual_sq = f.residual_sq;
    row.iterations = f.iterations;
    row.status = to_string(f.status);
  }
  return row;
}

void check_phase1_inputs(const Vector& b, const std::vector<Subdictionary>& subs) {
  if (subs.empty()) throw std::invalid_argument("phase1: no subdictionaries");
  for (const auto& s : subs) {
    if (s.W.rows() != b.size() || s.dce.mu.size() != b.size()) {
      throw std::invalid_argument("phase1: datum length does not match the bundle");
    }
  }
}

void pick_winner(Phase1Result& r) {
  r.winner = 0;
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    if (r.rows[i].residual_sq < r.rows[static_cast<std::size_t>(r.winner)].residual_sq) {
      r.winner = static_cast<int>(i);
    }
  }
  const double best = r.rows[static_cast<std::size_t>(r.winner)].residual_sq;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    if (static_cast<int>(i) != r.winner && r.rows[i].residual_sq == best) {
      r.ties.push_back(static_cast<int>(i));
    }
  }
}

}  // namespace

const char* to_string(Phase1Solver s) { return s == Phase1Solver::kIas ? "ias" : "nnls"; }

const char* to_string(Interpolation mode) {
  return mode == Interpolation::kNormalized ? "normalized" : "raw";
}

Phase1Solver parse_phase1_solver(const std::string& text) {
  if (text == "ias") return Phase1Solver::kIas;
  if (text == "nnls") return Phase1Solver::kNnls;
  throw ConfigError("unknown phase-1 solver '" + text + "' (expected ias or nnls)");
}

Interpolation parse_interpolation(const std::string& text) {
  if (text == "normalized") return Interpolation::kNormalized;
  if (text == "raw") return Interpolation::kRaw;
  throw ConfigError("unknown interpolation '" + text + "' (expected normalized or raw)");
}

Phase1Result phase1_identify(const Vector& b, const std::vector<Subdictionary>& subs,
                             const EstimateOptions& options) {
  check_phase1_inputs(b, subs);
  Phase1Result r;
  r.rows.resize(subs.size());
  std::vector<std::string> errors(subs.size());
  const int threads = options.workers > 0 ? options.workers : omp_get_max_threads();
  const int n = static_cast<int>(subs.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
  for (int i = 0; i < n; ++i) {
    try {
      r.rows[static_cast<std::size_t>(i)] = identify_one(b, subs[static_cast<std::size_t>(i)], options);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!errors[static_cast<std::size_t>(i)].empty()) {
      throw ConfigError("subdictionary " + std::to_string(i) + ": " + errors[static_cast<std::size_t>(i)]);
    }
  }
  pick_winner(r);
  return r;
}

Phase1Result phase1_identify_serial(const Vector& b, const std::vector<Subdictionary>& subs,
                                    const EstimateOptions& options) {
  check_phase1_inputs(b, subs);
  Phase1Result r;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    try {
      r.rows.push_back(identify_one(b, subs[i], options));
    } catch (const std::exception& e) {
      throw ConfigError("subdictionary " + std::to_string(i) + ": " + e.what());
    }
  }
  pick_winner(r);
  return r;
}

Phase2Result phase2_code(const Vector& b, const Subdictionary& winner, const Dictionary& dict,
                         const EstimateOptions& options) {
  Matrix D = winner.block(dict.atoms);
  if (D.rows() != b.size()) throw std::invalid_argument("phase2: datum length does not match the bundle");
  // Both branches leave unit-variance noise, so the Morozov level is m.
  Vector rhs;
  if (options.phase2_whitened) {
    D = winner.whitener.apply(D);
    rhs = winner.whitener.apply(Vector(b - winner.dce.mu));
  } else {
    if (!(options.phase2_sigma > 0.0)) throw ConfigError("phase2 sigma must be positive");
    D /= options.phase2_sigma;
    rhs = b / options.phase2_sigma;
  }
  IasConfig c;
  c.eta = options.phase2_eta;
  c.tol_theta = options.phase2_tol_theta;
  c.max_iter = options.phase2_max_iter;
  c.hybrid_switch_iter = options.phase2_hybrid_switch;
  c.inner = CglsTarget::morozov(static_cast<double>(D.rows()));
  c.inner.max_iter = options.phase2_inner_max_iter;
  c.descent_guard = options.descent_guard;
  const IasResult f = c.hybrid_switch_iter >= 0 ? ias_hybrid(D, rhs, c) : ias(D, rhs, c);

  Phase2Result r;
  r.x = f.x;
  r.residual_sq = options.phase2_whitened ? f.residual_sq
                                           : f.residual_sq * options.phase2_sigma * options.phase2_sigma;
  r.iterations = f.iterations;
  r.status = f.status;
  const double xmax = r.x.size() > 0 ? r.x.maxCoeff() : 0.0;
  for (Eigen::Index k = 0; k < r.x.size(); ++k) {
    if (xmax > 0.0 && r.x[k] > options.support_rel_tol * xmax) {
      const std::size_t j = winner.members[static_cast<std::size_t>(k)];
      r.support.push_back({j, dict.labels[j], r.x[k]});
    }
  }
  std::stable_sort(r.support.begin(), r.support.end(),
                   [](const SupportEntry& a, const SupportEntry& b) { return a.weight > b.weight; });
  return r;
}

Phase3Result phase3_interpolate(const Vector& x, const std::vector<ParamVector>& labels) {
  if (static_cast<std::size_t>(x.size()) != labels.size()) {
    throw std::invalid_argument("phase3: weight and label counts differ");
  }
  Phase3Result r;
  double acc[3] = {0.0, 0.0, 0.0};
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (x[k] < 0.0) throw std::invalid_argument("phase3: negative weight");
    if (x[k] == 0.0) continue;
    r.weight_sum += x[k];
    for (int a = 0; a < 3; ++a) acc[a] += x[k] * component(labels[static_cast<std::size_t>(k)], a);
  }
  if (!(r.weight_sum > 0.0)) throw EstimationError("sparse code is identically zero");
  for (int a = 0; a < 3; ++a) {
    set_component(r.xi_raw, a, acc[a]);
    set_component(r.xi_normalized, a, acc[a] / r.weight_sum);
  }
  return r;
}

EstimationResult estimate(const PhTrace& datum, const Bundle& bundle, const ForwardConfig& config,
                          const EstimateOptions& options) {
  if (bundle.subs.empty()) throw BundleError("bundle has no subdictionaries");
  const Vector b = Eigen::Map<const Vector>(datum.values.data(), static_cast<Eigen::Index>(datum.size()));
  if (b.size() != bundle.dict.atoms.rows()) {
    throw EstimationError("datum has " + std::to_string(b.size()) + " samples, the bundle expects " +
                          std::to_string(bundle.dict.atoms.rows()));
  }
  EstimationResult r;
  r.interpolation = options.interpolation;

  auto t0 = Clock::now();
  r.phase1 = phase1_identify(b, bundle.subs, options);
  r.timings.phase1 = seconds_since(t0);

  t0 = Clock::now();
  const Subdictionary& w = bundle.subs[static_cast<std::size_t>(r.phase1.winner)];
  r.phase2 = phase2_code(b, w, bundle.dict, options);
  r.timings.phase2 = seconds_since(t0);

  t0 = Clock::now();
  std::vector<ParamVector> labels;
  labels.reserve(w.members.size());
  for (std::size_t j : w.members) labels.push_back(bundle.dict.labels[j]);
  r.phase3 = phase3_interpolate(r.phase2.x, labels);
  r.xi = options.interpolation == Interpolation::kNormalized ? r.phase3.xi_normalized : r.phase3.xi_raw;
  try {
    r.physical = map_params(r.xi, config.scales);
  } catch (const std::domain_error&) {
    r.physical.reset();
  }
  r.timings.phase3 = seconds_since(t0);

  if (options.replay) {
    t0 = Clock::now();
    try {
      r.replay = synthesize_datum(config, r.xi);
    } catch (const std::exception& e) {
      r.replay_error = e.what();
    }
    r.timings.replay = seconds_since(t0);
  }
  return r;
}

void write_report_text(std::ostream& out, const EstimationResult& r) {
  out << "winner " << r.phase1.winner << '\n';
  if (!r.phase1.ties.empty()) {
    out << "tied_with";
    for (int i : r.phase1.ties) out << ' ' << i;
    out << '\n';
  }
  out << "phase1 residuals (whitened, squared)\n";
  for (std::size_t i = 0; i < r.phase1.rows.size(); ++i) {
    const auto& row = r.phase1.rows[i];
    out << "  " << i << ' ' << fmt(row.residual_sq) << " iterations " << row.iterations << ' '
        << row.status << (static_cast<int>(i) == r.phase1.winner ? " *" : "") << '\n';
  }
  out << "phase2 " << to_string(r.phase2.status) << " iterations " << r.phase2.iterations
      << " residual_sq " << fmt(r.phase2.residual_sq) << " support " << r.phase2.support.size() << '\n';
  for (const auto& s : r.phase2.support) {
    out << "  atom " << s.atom << " xi (" << fmt(s.label.lambda) << ", " << fmt(s.label.A) << ", "
        << fmt(s.label.gamma) << ") weight " << fmt(s.weight) << '\n';
  }
  const auto& p3 = r.phase3;
  out << "weight_sum " << fmt(p3.weight_sum) << '\n'
      << "xi_raw " << fmt(p3.xi_raw.lambda) << ' ' << fmt(p3.xi_raw.A) << ' ' << fmt(p3.xi_raw.gamma) << '\n'
      << "xi_normalized " << fmt(p3.xi_normalized.lambda) << ' ' << fmt(p3.xi_normalized.A) << ' '
      << fmt(p3.xi_normalized.gamma) << '\n'
      << "interpolation " << to_string(r.interpolation) << '\n';
  if (r.physical) {
    out << "lambda_um_s " << fmt(r.physical->lambda) << '\n'
        << "A0 " << fmt(r.physical->A0) << '\n'
        << "gamma_um_s " << fmt(r.physical->gamma) << '\n';
  } else {
    out << "physical unavailable (estimate outside the parameter box)\n";
  }
  if (!r.replay_error.empty()) out << "replay_error " << r.replay_error << '\n';
  out << "seconds phase1 " << fmt(r.timings.phase1) << " phase2 " << fmt(r.timings.phase2) << " phase3 "
      << fmt(r.timings.phase3) << " replay " << fmt(r.timings.replay) << '\n';
}

void write_report_csv(std::ostream& out, const EstimationResult& r) {
  out << "section,key,value\n";
  out << "phase1,winner," << r.phase1.winner << '\n';
  for (std::size_t i = 0; i < r.phase1.rows.size(); ++i) {
    out << "phase1,residual_sq_" << i << ',' << fmt(r.phase1.rows[i].residual_sq) << '\n';
  }
  out << "phase2,status," << to_string(r.phase2.status) << '\n'
      << "phase2,iterations," << r.phase2.iterations << '\n'
      << "phase2,residual_sq," << fmt(r.phase2.residual_sq) << '\n';
  for (const auto& s : r.phase2.support) {
    out << "support," << s.atom << ',' << fmt(s.weight) << '\n';
  }
  const auto& p3 = r.phase3;
  out << "phase3,xi_raw_lambda," << fmt(p3.xi_raw.lambda) << '\n'
      << "phase3,xi_raw_A," << fmt(p3.xi_raw.A) << '\n'
      << "phase3,xi_raw_gamma," << fmt(p3.xi_raw.gamma) << '\n'
      << "phase3,xi_lambda," << fmt(p3.xi_normalized.lambda) << '\n'
      << "phase3,xi_A," << fmt(p3.xi_normalized.A) << '\n'
      << "phase3,xi_gamma," << fmt(p3.xi_normalized.gamma) << '\n'
      << "phase3,interpolation," << to_string(r.interpolation) << '\n';
  if (r.physical) {
    out << "physical,lambda," << fmt(r.physical->lambda) << '\n'
        << "physical,A0," << fmt(r.physical->A0) << '\n'
        << "physical,gamma," << fmt(r.physical->gamma) << '\n';
  }
  out << "timing,phase1," << fmt(r.timings.phase1) << '\n'
      << "timing,phase2," << fmt(r.timings.phase2) << '\n'
      << "timing,phase3," << fmt(r.timings.phase3) << '\n'
      << "timing,replay," << fmt(r.timings.replay) << '\n';
}

void write_overlay_csv(std::ostream& out, const PhTrace& datum, const EstimationResult& r) {
  out << "t,datum,replay\n";
  for (std::size_t i = 0; i < datum.size(); ++i) {
    out << fmt(static_cast<double>(i) * datum.dt) << ',' << fmt(datum.values[i]) << ',';
    if (r.replay && i < r.replay->size()) out << fmt(r.replay->values[i]);
    out << '\n';
  }
}

}  // namespace cellph
