// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// The ctest entry only requires that every criterion ran and reported.
//
// Environment:
//   ACCEPT_CACHE_DIR     atom and bundle cache (default: build-tree acceptance_cache)
//   ACCEPT_PAPER_SCALE=1 also run the full-scale reproduction (hours)

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cellph/bundle.hpp"
#include "cellph/errors.hpp"
#include "cellph/estimate.hpp"
#include "cellph/forward.hpp"
#include "cellph/measure.hpp"
#include "cellph/nmf.hpp"
#include "cellph/params.hpp"
#include "cellph/sparse.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace cellph;
namespace fs = std::filesystem;

namespace {

enum class Verdict { kPass, kFail, kSkip };

struct Outcome {
  Verdict verdict = Verdict::kFail;
  std::string detail;
};

Outcome pass(std::string d) { return {Verdict::kPass, std::move(d)}; }
Outcome fail(std::string d) { return {Verdict::kFail, std::move(d)}; }
Outcome verdict(bool ok, std::string d) { return {ok ? Verdict::kPass : Verdict::kFail, std::move(d)}; }

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& run) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = run();
  } catch (const std::exception& e) {
    o = fail(std::string("exception: ") + e.what());
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const char* tag = o.verdict == Verdict::kPass ? "PASS" : o.verdict == Verdict::kFail ? "FAIL" : "SKIP";
  if (o.verdict == Verdict::kFail) ++failures;
  std::printf("criterion %2d %-28s %s  %s (%.1f s)\n", id, name, tag, o.detail.c_str(), s);
  std::fflush(stdout);
}

// |a - b| within half a unit in the 4th significant digit of b.
bool four_digits(double a, double b) {
  const double unit = std::pow(10.0, std::floor(std::log10(std::abs(b))) - 3);
  return std::abs(a - b) <= 0.5 * unit;
}

struct Experiment {
  const char* name;
  ParamVector xi;
  double lambda, A0, log10_gamma;
};

const Experiment kExperiments[] = {
    {"Exp1", {0.9, 0.8, 0.8}, 30.78, 16.0, -4.2},
    {"Exp2", {0.8, 1.0, 2.0 / 3.0}, 27.36, 20.0, -4.0},
    {"Exp3", {0.8, 0.8, 1.15 / 1.5}, 27.36, 16.0, -4.15},
};

// ---------------------------------------------------------------------------

Outcome parameter_mapping() {
  double worst = 0.0;
  bool ok = true;
  for (const auto& e : kExperiments) {
    const PhysicalParams p = map_params(e.xi);
    const double g = std::pow(10.0, e.log10_gamma);
    ok &= four_digits(p.lambda, e.lambda) && four_digits(p.A0, e.A0) && four_digits(p.gamma, g);
    worst = std::max({worst, std::abs(p.lambda / e.lambda - 1), std::abs(p.A0 / e.A0 - 1), std::abs(p.gamma / g - 1)});
  }
  return verdict(ok, fmt("worst relative deviation %.2e", worst));
}

Outcome equilibrium_persistence() {
  const ForwardConfig c = fixture::stationary_config();
  PhysicalParams p = map_params(kExperiments[0].xi);
  p.lambda = 0.0;
  p.gamma = 0.0;
  const std::vector<double> ph = simulate(c, p).compartment_ph();
  double worst = 0.0;
  for (double v : ph) worst = std::max(worst, std::abs(v - 7.5));
  return verdict(ph.size() == 1001 && worst <= 1e-6, fmt("max |pH - 7.5| = %.2e over %g frames", worst, ph.size()));
}

Outcome conservation() {
  ForwardConfig c;
  c.initial.exterior[kCO2] = 1.5;
  c.initial.exterior[kHA] = 1.0;
  PhysicalParams p = map_params(kExperiments[0].xi);
  p.lambda = 0.0;
  p.gamma = 0.0;
  const SimulationResult r = simulate(c, p);
  const auto& u0 = r.compartment.front();
  const double carbon0 = u0[kCO2] + u0[kH2CO3] + u0[kHCO3];
  const double buffer0 = u0[kHA] + u0[kA];
  double dc = 0.0, db = 0.0;
  for (const auto& u : r.compartment) {
    dc = std::max(dc, std::abs(u[kCO2] + u[kH2CO3] + u[kHCO3] - carbon0) / carbon0);
    db = std::max(db, std::abs(u[kHA] + u[kA] - buffer0) / buffer0);
  }
  const bool reacted = r.compartment.back()[kCO2] < 0.99 * u0[kCO2];
  return verdict(dc <= 1e-8 && db <= 1e-8 && reacted,
                 fmt("carbon %.2e, buffer %.2e relative drift; CO2 %.3f -> %.3f mM", dc, db, u0[kCO2],
                     r.compartment.back()[kCO2]));
}

Outcome qualitative_transient(const fs::path& cache) {
  GridSpec g;
  g.n = {8, 8, 8};
  GenerateOptions o;
  o.cache_dir = cache;
  const Dictionary d = generate(g, ForwardConfig{}, o);
  const double q = ForwardConfig{}.measure.precision;
  int bad_rise = 0, bad_tail = 0;
  double min_peak = 1e300;
  for (Eigen::Index j = 0; j < d.atoms.cols(); ++j) {
    const auto col = d.atoms.col(j);
    const double peak = col.maxCoeff();
    min_peak = std::min(min_peak, peak);
    if (!(peak > 0.0)) ++bad_rise;
    for (Eigen::Index i = col.size() - 50; i + 1 < col.size(); ++i) {
      if (col[i + 1] > col[i] + q + 1e-12) {
        ++bad_tail;
        break;
      }
    }
  }
  return verdict(bad_rise == 0 && bad_tail == 0,
                 fmt("%g atoms: %g without rise, %g with rising tail; smallest peak %.2f", static_cast<double>(d.atoms.cols()),
                     bad_rise, bad_tail, min_peak));
}

Outcome ias_correctness() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  // Stationarity of the gamma-mode theta update.
  double worst_fd = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double x = std::pow(10.0, 4 * U(rng) - 2);
    const double vt = std::pow(10.0, 6 * U(rng) - 3);
    const double eta = std::pow(10.0, 4 * U(rng) - 4);
    const double th = theta_update_gamma(x, vt, eta);
    const double h = 1e-5;
    const double g = (gamma_prior_energy(x, th * (1 + h), vt, eta) - gamma_prior_energy(x, th * (1 - h), vt, eta)) / (2 * h);
    worst_fd = std::max(worst_fd, std::abs(g) / (x * x / (2 * th) + th / vt + eta));
  }
  // Objective descent.
  int rises = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = fixture::sparse_problem(rng, 15 + trial % 20, 30, 4, 0.05);
    IasConfig c;
    c.eta = std::pow(10.0, -3 * U(rng));
    c.max_iter = 60;
    const IasResult r = ias(p.A, p.b, c);
    const auto& obj = r.diagnostics.objective;
    for (std::size_t k = 1; k < obj.size(); ++k) {
      if (obj[k] > obj[k - 1] * (1 + 1e-10)) {
        ++rises;
        break;
      }
    }
  }
  // Small-eta limit against weighted l1.
  double worst_l1 = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = fixture::sparse_problem(rng, 30, 60, 5, 0.01);
    IasConfig c;
    c.eta = 1e-4;
    c.tol_theta = 1e-10;
    c.max_iter = 5000;
    const IasResult r = ias(p.A, p.b, c);
    Vector w(p.A.cols());
    for (Eigen::Index j = 0; j < p.A.cols(); ++j) w[j] = std::sqrt(2.0) * p.A.col(j).norm();
    const Vector ref = oracle::weighted_l1_nonneg(p.A, p.b, w);
    worst_l1 = std::max(worst_l1, (r.x - ref).norm() / ref.norm());
  }
  return verdict(worst_fd <= 1e-8 && rises == 0 && worst_l1 <= 1e-2,
                 fmt("stationarity %.1e, %g ascending runs, l1 mismatch %.1e", worst_fd, rises, worst_l1));
}

Outcome nnls_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix A = oracle::random_matrix(rng, 20, 10);
    Vector xs(10);
    for (Eigen::Index j = 0; j < 10; ++j) xs[j] = U(rng) < 0.3 ? 0.0 : U(rng);
    const Vector b = A * xs;
    const NnlsResult r = nnls_cgls(A, b);
    const Vector ref = oracle::lawson_hanson(A, b);
    if (r.x.minCoeff() < 0.0) return fail("negative entry");
    worst = std::max(worst, std::abs((b - A * r.x).norm() - (b - A * ref).norm()) / b.norm());
  }
  return verdict(worst <= 1e-4, fmt("worst relative residual difference %.2e", worst));
}

Outcome nmf_checks() {
  std::mt19937_64 rng(55);
  int rises = 0;
  for (int rank : {1, 2, 3, 5}) {
    const Matrix D = oracle::random_nonneg(rng, 30, 25);
    NmfOptions o;
    o.max_sweeps = 40;
    const NmfResult r = nmf(D, rank, o);
    for (std::size_t k = 1; k < r.objective.size(); ++k) {
      if (r.objective[k] > r.objective[k - 1] * (1 + 1e-12)) ++rises;
    }
  }
  double worst = 0.0;
  for (int rank : {1, 2, 3, 4}) {
    const Matrix D = fixture::separable_product(rng, 30, 40, rank);
    worst = std::max(worst, nmf(D, rank).relative_error(D));
  }
  return verdict(rises == 0 && worst < 1e-4, fmt("%g objective increases, worst fixture error %.2e", rises, worst));
}

// ---------------------------------------------------------------------------

BuildOptions desk_options(const fs::path& cache) {
  BuildOptions o;
  o.grid.n = {12, 12, 12};
  o.k = 5;
  o.rank = 3;
  o.dce.samples = 500;
  o.dce.mode = DceMode::kDiagonal;
  o.generate.cache_dir = cache;
  o.log = [](const std::string& s) { std::fprintf(stderr, "  %s\n", s.c_str()); };
  return o;
}

// The desk bundle, rebuilt only when the cached copy is missing or stale.
Bundle desk_bundle(const fs::path& cache, const ForwardConfig& config) {
  const BuildOptions o = desk_options(cache);
  const fs::path dir = cache / "desk_bundle";
  std::ostringstream key;
  key << "grid 12 k 5 rank 3 dce 500 diagonal seeds 1 restarts " << o.kmedoids.restarts << " sweeps "
      << o.nmf.max_sweeps << " config " << config_hash(config);
  if (fs::exists(dir / "acceptance_key.txt")) {
    std::ifstream f(dir / "acceptance_key.txt");
    std::string recorded;
    std::getline(f, recorded);
    if (recorded == key.str()) {
      try {
        std::fprintf(stderr, "  reusing %s\n", dir.c_str());
        return load_bundle(dir, &config);
      } catch (const BundleError& e) {
        std::fprintf(stderr, "  cached bundle rejected: %s\n", e.what());
      }
    }
  }
  Bundle b = build_bundle(config, o);
  fs::remove_all(dir);
  save_bundle(dir, b);
  std::ofstream(dir / "acceptance_key.txt") << key.str() << '\n';
  return b;
}

struct DeskRun {
  std::vector<EstimationResult> results;
};

Outcome desk_end_to_end(const Bundle& b, const ForwardConfig& config, DeskRun& run) {
  bool ok = true;
  std::string detail;
  for (const auto& e : kExperiments) {
    const PhTrace d = synthesize_datum(config, e.xi);
    EstimationResult r = estimate(d, b, config);
    const PhysicalParams p = map_params(r.xi, config.scales);
    const double dl = std::abs(p.lambda - e.lambda);
    const double dA = std::abs(p.A0 - e.A0);
    const double dg = std::abs(std::log10(p.gamma) - e.log10_gamma);
    const bool good = dl <= 0.7 && dA <= 1.5 && dg <= 0.06;
    ok &= good;
    detail += std::string(e.name) +
              fmt(" [winner %g] lambda %.2f (err %.2f)", r.phase1.winner, p.lambda, dl) + fmt(" A0 %.2f (err %.2f)", p.A0, dA) +
              fmt(" log10 gamma %.3f (err %.3f)", std::log10(p.gamma), dg) + (good ? "; " : " out of tolerance; ");
    run.results.push_back(std::move(r));
  }
  return verdict(ok, detail);
}

Outcome winner_structure(const DeskRun& run) {
  if (run.results.size() != 3) return fail("end-to-end run did not complete");
  const int w1 = run.results[0].phase1.winner, w2 = run.results[1].phase1.winner, w3 = run.results[2].phase1.winner;
  return verdict(w1 == w3 && w2 != w1, fmt("winners Exp1 %g, Exp2 %g, Exp3 %g", w1, w2, w3));
}

Outcome serialization(const Bundle& b, const ForwardConfig& config) {
  const fs::path dir = fs::temp_directory_path() / ("cellph_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  save_bundle(dir, b);
  const Bundle back = load_bundle(dir, &config);
  fs::remove_all(dir);
  if (!bitwise_equal(b, back)) return fail("reloaded bundle differs");
  for (const auto& e : kExperiments) {
    const PhTrace d = synthesize_datum(config, e.xi);
    const EstimationResult r1 = estimate(d, b, config), r2 = estimate(d, back, config);
    if (r1.phase1.winner != r2.phase1.winner || r1.phase2.x != r2.phase2.x || !(r1.xi == r2.xi)) {
      return fail(std::string("estimate differs after reload for ") + e.name);
    }
  }
  return pass("bitwise round trip; identical estimates for the three experiments");
}

Outcome full_scale(const fs::path& cache, const ForwardConfig& config) {
  const char* flag = std::getenv("ACCEPT_PAPER_SCALE");
  if (flag == nullptr || std::string(flag) != "1") {
    return {Verdict::kSkip, "opt-in (ACCEPT_PAPER_SCALE=1): 64000 forward runs plus 49000 DCE samples"};
  }
  BuildOptions o = desk_options(cache);
  o.grid.n = {40, 40, 40};
  o.k = 7;
  o.dce.samples = 7000;
  const Bundle b = build_bundle(config, o);
  // Published full-scale estimates; the band is twice their error per component.
  const double est[3][3] = {{30.84, 16.29, -4.19}, {27.43, 19.36, -4.01}, {27.29, 17.31, -4.12}};
  bool ok = true;
  std::string detail;
  for (int i = 0; i < 3; ++i) {
    const auto& e = kExperiments[i];
    const PhTrace d = synthesize_datum(config, e.xi);
    EstimateOptions eo;
    eo.replay = true;
    const EstimationResult r = estimate(d, b, config, eo);
    const PhysicalParams p = map_params(r.xi, config.scales);
    const double tol_l = 2 * std::abs(est[i][0] - e.lambda), tol_A = 2 * std::abs(est[i][1] - e.A0),
                 tol_g = 2 * std::abs(est[i][2] - e.log10_gamma);
    const double dl = std::abs(p.lambda - e.lambda), dA = std::abs(p.A0 - e.A0),
                 dg = std::abs(std::log10(p.gamma) - e.log10_gamma);
    double overlay = 1e300;
    if (r.replay) {
      overlay = 0.0;
      for (std::size_t k = 0; k < d.size(); ++k) overlay = std::max(overlay, std::abs(r.replay->values[k] - d.values[k]));
    }
    const bool good = dl <= tol_l && dA <= tol_A && dg <= tol_g && overlay <= 0.02 + 1e-12;
    ok &= good;
    detail += std::string(e.name) + fmt(" errors %.2f %.2f %.3f overlay %.3f; ", dl, dA, dg, overlay);
  }
  return verdict(ok, detail);
}

}  // namespace

int main() {
  const char* env = std::getenv("ACCEPT_CACHE_DIR");
  const fs::path cache = env != nullptr ? fs::path(env) : fs::path(CELLPH_ACCEPTANCE_CACHE);
  fs::create_directories(cache);
  const ForwardConfig config;

  report(1, "parameter mapping", parameter_mapping);
  report(2, "equilibrium persistence", equilibrium_persistence);
  report(3, "conservation", conservation);
  report(4, "qualitative transient 8^3", [&] { return qualitative_transient(cache); });
  report(5, "IAS correctness", ias_correctness);
  report(6, "NNLS oracle equivalence", nnls_oracle);
  report(7, "NMF", nmf_checks);

  Bundle desk;
  bool have_desk = false;
  std::string desk_error;
  try {
    desk = desk_bundle(cache, config);
    have_desk = true;
  } catch (const std::exception& e) {
    desk_error = e.what();
  }
  DeskRun run;
  report(8, "desk-scale end-to-end 12^3", [&] {
    return have_desk ? desk_end_to_end(desk, config, run) : fail("bundle build failed: " + desk_error);
  });
  report(9, "full-scale reproduction", [&] { return full_scale(cache, config); });
  report(10, "winner-class structure", [&] { return winner_structure(run); });
  report(11, "serialization", [&] {
    return have_desk ? serialization(desk, config) : fail("bundle build failed: " + desk_error);
  });

  std::printf("all 11 criteria reported\n");
  std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "ACCEPTED" : "NOT ACCEPTED", failures);
  return failures == 0 ? 0 : 1;
}
