#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cellph/bundle.hpp"
#include "cellph/errors.hpp"
#include "cellph/estimate.hpp"
#include "cellph/forward.hpp"

#ifndef CELLPH_VERSION
#define CELLPH_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using namespace cellph;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfig = 2;  // configuration, command line or input schema
constexpr int kIntegration = 3;
constexpr int kBundle = 4;
constexpr int kEstimation = 5;

struct Globals {
  std::string config_path;
  int workers = 0;
  std::uint64_t seed = 1;
  bool quiet = false;
  std::string command_line;
};

void log(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << '\n';
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

ForwardConfig load(const Globals& g) {
  ForwardConfig c = g.config_path.empty() ? ForwardConfig{} : load_config(g.config_path);
  c.validate();
  return c;
}

ParamVector parse_xi(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("--xi: bad number '" + item + "'");
    }
  }
  if (v.size() != 3) throw ConfigError("--xi expects three comma-separated values");
  for (double x : v) {
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("--xi components must lie in [0, 1]");
  }
  return {v[0], v[1], v[2]};
}

std::vector<int> parse_k_range(const std::string& text) {
  const auto dash = text.find('-');
  try {
    if (dash == std::string::npos) return {std::stoi(text)};
    const int lo = std::stoi(text.substr(0, dash)), hi = std::stoi(text.substr(dash + 1));
    if (lo < 1 || hi < lo) throw ConfigError("bad k range '" + text + "'");
    std::vector<int> ks;
    for (int k = lo; k <= hi; ++k) ks.push_back(k);
    return ks;
  } catch (const std::logic_error&) {
    throw ConfigError("bad k range '" + text + "'");
  }
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f.precision(17);
  return f;
}

void write_run_manifest(const fs::path& dir, const Globals& g, const ForwardConfig& config,
                        const std::string& command, nlohmann::json extra) {
  nlohmann::json j;
  j["tool"] = "cellph";
  j["version"] = CELLPH_VERSION;
  j["command"] = command;
  j["command_line"] = g.command_line;
  j["config_hash"] = config_hash(config);
  j["config"] = nlohmann::json::parse(dump_config(config));
  j["seed"] = g.seed;
  j["workers"] = g.workers;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  j["compiler"] = __VERSION__;
  j["details"] = std::move(extra);
  auto f = open_out(dir / "run_manifest.json");
  f << j.dump(2) << '\n';
}

// simulate ------------------------------------------------------------------

struct SimulateArgs {
  std::string xi;
  std::string out;
  double noise_sd = 0.0;
};

int cmd_simulate(const Globals& g, const SimulateArgs& a) {
  ForwardConfig config = load(g);
  const ParamVector xi = parse_xi(a.xi);
  if (a.noise_sd < 0.0) throw ConfigError("--noise-sd must be >= 0");
  config.measure.noise_sd = a.noise_sd;
  config.measure.noise_seed = g.seed;
  const fs::path out = a.out.empty() ? fs::path(env_or("CELLPH_OUT", ".")) : fs::path(a.out);
  fs::create_directories(out);

  const PhysicalParams p = map_params(xi, config.scales);
  const SimulationResult sim = simulate(config, p);
  const std::vector<double> ph = sim.compartment_ph();
  const PhTrace datum = make_datum(add_noise(ph, config.measure), config.measure, config.experiment);
  save_datum_csv(out / "datum.csv", datum);
  {
    auto f = open_out(out / "trace.csv");
    f << "t,pH";
    for (std::size_t s = 0; s < kNumSpecies; ++s) f << ",u" << s + 1;
    f << '\n';
    for (std::size_t i = 0; i < sim.times.size(); ++i) {
      f << sim.times[i] << ',' << ph[i];
      for (double u : sim.compartment[i]) f << ',' << u;
      f << '\n';
    }
  }
  write_run_manifest(out, g, config, "simulate",
                     {{"xi", {xi.lambda, xi.A, xi.gamma}},
                      {"lambda_um_s", p.lambda},
                      {"A0", p.A0},
                      {"gamma_um_s", p.gamma},
                      {"noise_sd", a.noise_sd},
                      {"steps", sim.stats.steps},
                      {"rejected", sim.stats.rejected}});
  log(g, "wrote " + (out / "datum.csv").string() + " and " + (out / "trace.csv").string());
  return kOk;
}

// build-dict / elbow ----------------------------------------------------------

struct BuildArgs {
  std::string grid = "12";
  int k = 5;
  int rank = 3;
  double rank_threshold = 1e-3;
  int dce_samples = 500;
  std::string dce_mode = "diagonal";
  int restarts = 8;
  int nmf_sweeps = 200;
  std::string elbow;
  std::string bundle;
  std::string cache;
  bool force = false;
};

fs::path bundle_dir(const std::string& arg) {
  const std::string d = arg.empty() ? env_or("CELLPH_BUNDLE", "") : arg;
  if (d.empty()) throw ConfigError("no bundle directory (--bundle or CELLPH_BUNDLE)");
  return d;
}

fs::path cache_dir(const std::string& arg, const fs::path& fallback) {
  const std::string d = arg.empty() ? env_or("CELLPH_CACHE", "") : arg;
  return d.empty() ? fallback : fs::path(d);
}

GenerateOptions generate_options(const Globals& g, const fs::path& cache) {
  GenerateOptions o;
  o.workers = g.workers;
  o.cache_dir = cache;
  if (!g.quiet) {
    o.progress = [](std::size_t done, std::size_t total) {
      if (done % 64 == 0 || done == total) {
#pragma omp critical(cellph_progress)
        std::cerr << "  simulated " << done << " / " << total << '\n';
      }
    };
  }
  return o;
}

void write_elbow(const fs::path& path, const std::vector<ElbowRow>& rows) {
  auto f = open_out(path);
  f << "k,cost\n";
  for (const auto& r : rows) f << r.k << ',' << r.cost << '\n';
}

int cmd_build(const Globals& g, const BuildArgs& a) {
  const ForwardConfig config = load(g);
  const fs::path dir = bundle_dir(a.bundle);
  BuildOptions o;
  o.grid = parse_grid_counts(a.grid);
  o.grid.validate();
  o.k = a.k;
  o.rank = a.rank;
  o.rank_threshold = a.rank_threshold;
  o.seeds = {g.seed, g.seed, g.seed};
  o.kmedoids.restarts = a.restarts;
  o.kmedoids.workers = g.workers;
  o.nmf.max_sweeps = a.nmf_sweeps;
  o.dce.samples = a.dce_samples;
  o.dce.mode = parse_dce_mode(a.dce_mode);
  o.dce.workers = g.workers;
  o.generate = generate_options(g, cache_dir(a.cache, fs::path(dir.string() + ".cache")));
  o.log = [&](const std::string& s) { log(g, s); };

  // A finished bundle records the options it was built with.
  std::ostringstream key;
  key << "grid " << o.grid.n[0] << ',' << o.grid.n[1] << ',' << o.grid.n[2] << " k " << o.k << " rank "
      << o.rank << " rank_threshold " << o.rank_threshold << " dce " << o.dce.samples << ' '
      << to_string(o.dce.mode) << " restarts " << a.restarts << " nmf_sweeps " << a.nmf_sweeps
      << " seed " << g.seed << " config " << config_hash(config);
  const fs::path stamp = dir / "build_options.txt";
  if (!a.force && fs::exists(stamp) && fs::exists(dir / "manifest.txt")) {
    std::ifstream f(stamp);
    std::string recorded;
    std::getline(f, recorded);
    if (recorded == key.str()) {
      const std::string summary = validate_bundle(dir, &config);
      log(g, "bundle up to date, nothing to do: " + summary);
      return kOk;
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  log(g, "generating " + std::to_string(o.grid.size()) + " atoms");
  Dictionary dict = generate(o.grid, config, o.generate);
  fs::create_directories(dir);
  nlohmann::json elbow = nlohmann::json::array();
  if (!a.elbow.empty()) {
    const auto rows = elbow_scan(dict.atoms, parse_k_range(a.elbow), o.kmedoids);
    write_elbow(dir / "elbow.csv", rows);
    for (const auto& r : rows) elbow.push_back({r.k, r.cost});
  }
  const Bundle b = build_bundle(config, std::move(dict), o);
  save_bundle(dir, b);
  {
    auto f = open_out(stamp);
    f << key.str() << '\n';
  }
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& s : b.subs) {
    subs.push_back({{"size", s.members.size()}, {"medoid", s.medoid}, {"rank", s.rank}, {"dce_ridge", s.dce.ridge}});
  }
  write_run_manifest(dir, g, config, "build-dict",
                     {{"options", key.str()},
                      {"clustering_cost", b.clustering_cost},
                      {"subdictionaries", subs},
                      {"elbow", elbow},
                      {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
  log(g, validate_bundle(dir, &config));
  return kOk;
}

struct ElbowArgs {
  std::string grid = "12";
  std::string ks = "2-10";
  int restarts = 8;
  std::string out;
  std::string cache;
};

int cmd_elbow(const Globals& g, const ElbowArgs& a) {
  const ForwardConfig config = load(g);
  GridSpec grid = parse_grid_counts(a.grid);
  grid.validate();
  const fs::path out = a.out.empty() ? fs::path(env_or("CELLPH_OUT", ".")) : fs::path(a.out);
  fs::create_directories(out);
  const Dictionary dict = generate(grid, config, generate_options(g, cache_dir(a.cache, {})));
  KMedoidsOptions km;
  km.restarts = a.restarts;
  km.seed = g.seed;
  km.workers = g.workers;
  const auto rows = elbow_scan(dict.atoms, parse_k_range(a.ks), km);
  write_elbow(out / "elbow.csv", rows);
  for (const auto& r : rows) std::cout << r.k << ' ' << r.cost << '\n';
  write_run_manifest(out, g, config, "elbow", {{"grid", a.grid}, {"k", a.ks}, {"restarts", a.restarts}});
  return kOk;
}

// estimate / validate-bundle --------------------------------------------------

struct EstimateArgs {
  std::string bundle;
  std::string datum;
  std::string out;
  std::string phase1_solver = "ias";
  std::string interpolation = "normalized";
  bool no_replay = false;
  EstimateOptions o;
};

int cmd_estimate(const Globals& g, EstimateArgs a) {
  const ForwardConfig config = load(g);
  const fs::path dir = bundle_dir(a.bundle);
  const fs::path out = a.out.empty() ? fs::path(env_or("CELLPH_OUT", ".")) : fs::path(a.out);
  PhTrace datum;
  try {
    datum = load_datum_csv(a.datum);
  } catch (const std::runtime_error& e) {
    throw ConfigError(std::string("datum: ") + e.what());
  }
  if (datum.size() != config.experiment.frame_count()) {
    throw ConfigError("datum has " + std::to_string(datum.size()) + " samples, the configuration expects " +
                      std::to_string(config.experiment.frame_count()));
  }
  const Bundle b = load_bundle(dir, &config);
  a.o.phase1_solver = parse_phase1_solver(a.phase1_solver);
  a.o.interpolation = parse_interpolation(a.interpolation);
  a.o.replay = !a.no_replay;
  const EstimationResult r = estimate(datum, b, config, a.o);

  fs::create_directories(out);
  {
    auto f = open_out(out / "report.txt");
    write_report_text(f, r);
  }
  {
    auto f = open_out(out / "report.csv");
    write_report_csv(f, r);
  }
  {
    auto f = open_out(out / "overlay.csv");
    write_overlay_csv(f, datum, r);
  }
  write_run_manifest(out, g, config, "estimate",
                     {{"bundle", fs::absolute(dir).string()},
                      {"bundle_config_hash", b.config_hash},
                      {"bundle_seeds", {b.seeds.cluster, b.seeds.nmf, b.seeds.dce}},
                      {"datum", a.datum},
                      {"phase1", {{"solver", a.phase1_solver}, {"eta", a.o.phase1_eta}, {"tol_theta", a.o.phase1_tol_theta}, {"max_iter", a.o.phase1_max_iter}}},
                      {"phase2", {{"eta", a.o.phase2_eta}, {"tol_theta", a.o.phase2_tol_theta}, {"max_iter", a.o.phase2_max_iter}, {"sigma", a.o.phase2_sigma}, {"inner_max_iter", a.o.phase2_inner_max_iter}, {"hybrid_switch", a.o.phase2_hybrid_switch}, {"whitened", a.o.phase2_whitened}}},
                      {"descent_guard", a.o.descent_guard},
                      {"interpolation", a.interpolation}});
  write_report_text(std::cout, r);
  return kOk;
}

int cmd_validate(const Globals& g, const std::string& bundle, bool check_config) {
  const fs::path dir = bundle_dir(bundle);
  ForwardConfig config;
  if (check_config) config = load(g);
  std::cout << validate_bundle(dir, check_config ? &config : nullptr) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  Globals g;
  for (int i = 0; i < argc; ++i) g.command_line += (i ? " " : "") + std::string(argv[i]);
  g.config_path = env_or("CELLPH_CONFIG", "");

  CLI::App app{"cellph: membrane CO2 permeability estimation from pH time series"};
  app.require_subcommand(1);
  app.add_option("--config", g.config_path, "Forward-model JSON (env CELLPH_CONFIG; built-in defaults if unset)");
  app.add_option("--workers", g.workers, "Threads for dictionary generation and DCE sampling (0 = all)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--seed", g.seed, "Seed for clustering, NMF, DCE sampling and measurement noise");
  app.add_flag("-q,--quiet", g.quiet, "No progress output");
  app.add_flag_callback("--print-default-config", [] {
    std::cout << dump_config(ForwardConfig{}) << '\n';
    std::exit(kOk);
  }, "Print the built-in configuration as JSON and exit");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Forward simulation: quantized datum and full compartment trace");
  s->add_option("--xi", sim.xi, "xi_lambda,xi_A,xi_gamma in [0,1]")->required();
  s->add_option("--out", sim.out, "Output directory (env CELLPH_OUT, default .)");
  s->add_option("--noise-sd", sim.noise_sd, "Gaussian pH noise before quantization");

  BuildArgs build;
  auto* bd = app.add_subcommand("build-dict", "Generate, cluster, compress and sample DCE; write a bundle");
  bd->add_option("--grid", build.grid, "Grid counts: n or n_lambda,n_A,n_gamma");
  bd->add_option("--k", build.k, "Number of subdictionaries")->check(CLI::PositiveNumber);
  bd->add_option("--rank", build.rank, "NMF rank (0 = by singular values)")->check(CLI::NonNegativeNumber);
  bd->add_option("--rank-threshold", build.rank_threshold, "Relative singular value cut for --rank 0");
  bd->add_option("--dce-samples", build.dce_samples, "DCE samples per subdictionary")->check(CLI::Range(2, 1 << 30));
  bd->add_option("--dce-mode", build.dce_mode, "full or diagonal");
  bd->add_option("--restarts", build.restarts, "k-medoids restarts")->check(CLI::PositiveNumber);
  bd->add_option("--nmf-sweeps", build.nmf_sweeps, "NMF alternating sweeps")->check(CLI::PositiveNumber);
  bd->add_option("--elbow", build.elbow, "Also write elbow.csv for this k range, e.g. 2-10");
  bd->add_option("--bundle", build.bundle, "Bundle directory (env CELLPH_BUNDLE)");
  bd->add_option("--cache", build.cache, "Atom cache directory (env CELLPH_CACHE, default <bundle>.cache)");
  bd->add_flag("--force", build.force, "Rebuild even when the bundle is up to date");

  ElbowArgs elbow;
  auto* el = app.add_subcommand("elbow", "k-medoids cost over a range of k");
  el->add_option("--grid", elbow.grid, "Grid counts: n or n_lambda,n_A,n_gamma");
  el->add_option("--k", elbow.ks, "k range, e.g. 2-10");
  el->add_option("--restarts", elbow.restarts, "k-medoids restarts")->check(CLI::PositiveNumber);
  el->add_option("--out", elbow.out, "Output directory (env CELLPH_OUT, default .)");
  el->add_option("--cache", elbow.cache, "Atom cache directory (env CELLPH_CACHE)");

  EstimateArgs est;
  auto* es = app.add_subcommand("estimate", "Estimate xi from a datum CSV");
  es->add_option("--bundle", est.bundle, "Bundle directory (env CELLPH_BUNDLE)");
  es->add_option("--datum", est.datum, "Datum CSV")->required();
  es->add_option("--out", est.out, "Output directory (env CELLPH_OUT, default .)");
  es->add_option("--phase1-solver", est.phase1_solver, "ias or nnls");
  es->add_option("--eta1", est.o.phase1_eta, "Phase 1 IAS eta");
  es->add_option("--tol1", est.o.phase1_tol_theta, "Phase 1 IAS theta tolerance");
  es->add_option("--max-iter1", est.o.phase1_max_iter, "Phase 1 IAS iterations");
  es->add_option("--eta2", est.o.phase2_eta, "Phase 2 IAS eta");
  es->add_option("--tol2", est.o.phase2_tol_theta, "Phase 2 IAS theta tolerance");
  es->add_option("--max-iter2", est.o.phase2_max_iter, "Phase 2 IAS iterations");
  es->add_option("--sigma2", est.o.phase2_sigma, "Phase 2 CGLS noise level");
  es->add_option("--inner-max-iter2", est.o.phase2_inner_max_iter, "Phase 2 CGLS iterations per pass (0 = default)");
  es->add_option("--hybrid-switch", est.o.phase2_hybrid_switch, "Phase 2 outer iteration switching to inverse gamma (-1 = never)");
  es->add_flag("--phase2-whitened", est.o.phase2_whitened, "Whiten Phase 2 with the winner's DCE statistics");
  es->add_flag("--descent-guard", est.o.descent_guard, "Line-search guard on every IAS x-update (monotone objective)");
  es->add_option("--interpolation", est.interpolation, "normalized or raw");
  es->add_flag("--no-replay", est.no_replay, "Skip the forward replay at the estimate");

  std::string vb_bundle;
  bool vb_config = false;
  auto* vb = app.add_subcommand("validate-bundle", "Verify bundle files, hashes and structure");
  vb->add_option("--bundle", vb_bundle, "Bundle directory (env CELLPH_BUNDLE)");
  vb->add_flag("--check-config", vb_config, "Also require the bundle to match the configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*s) return cmd_simulate(g, sim);
    if (*bd) return cmd_build(g, build);
    if (*el) return cmd_elbow(g, elbow);
    if (*es) return cmd_estimate(g, est);
    if (*vb) return cmd_validate(g, vb_bundle, vb_config);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const IntegrationError& e) {
    std::cerr << "integration error: " << e.what() << '\n';
    return kIntegration;
  } catch (const BundleError& e) {
    std::cerr << "bundle error: " << e.what() << '\n';
    return kBundle;
  } catch (const EstimationError& e) {
    std::cerr << "estimation error: " << e.what() << '\n';
    return kEstimation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
