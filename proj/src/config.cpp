#include "cellph/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cellph/errors.hpp"
#include "json.hpp"

namespace cellph {

using nlohmann::json;

void Geometry::validate() const {
  if (!(R > 0 && R < R_inf)) throw ConfigError("geometry: need 0 < R < R_inf");
  if (!(w > 0 && h > 0)) throw ConfigError("geometry: electrode w and h must be > 0");
}

std::size_t ExperimentSpec::frame_count() const {
  return static_cast<std::size_t>(std::llround(t_end / dt_out)) + 1;
}

void ForwardConfig::validate() const {
  geometry.validate();
  rates.validate();
  ca.validate();
  for (std::size_t n = 0; n < kNumSpecies; ++n) {
    if (!(diffusion.interior[n] > 0 && diffusion.exterior[n] > 0)) {
      throw ConfigError("diffusion coefficients must be > 0");
    }
    if (!(initial.interior[n] >= 0 && initial.exterior[n] >= 0)) {
      throw ConfigError("initial concentrations must be >= 0");
    }
  }
  if (!(initial.interior[kH] > 0 && initial.exterior[kH] > 0)) {
    throw ConfigError("initial H+ must be > 0");
  }
  if (mesh.interior_nodes < 3 || mesh.exterior_nodes < 3) {
    throw ConfigError("mesh: need at least 3 nodes per domain");
  }
  if (!(mesh.interior_grading >= 1.0 && mesh.exterior_grading >= 1.0)) {
    throw ConfigError("mesh: grading ratios must be >= 1");
  }
  const auto& it = integrator;
  if (!(it.rtol > 0 && it.atol > 0 && it.atol_proton > 0 && it.initial_step > 0 &&
        it.min_step > 0 && it.max_step >= it.min_step && it.neg_tol >= 0 && it.max_steps > 0)) {
    throw ConfigError("integrator settings out of range");
  }
  if (!(experiment.t_end > 0 && experiment.dt_out > 0)) {
    throw ConfigError("experiment: t_end and dt_out must be > 0");
  }
  const double frames = experiment.t_end / experiment.dt_out;
  if (std::abs(frames - std::round(frames)) > 1e-9 * frames) {
    throw ConfigError("experiment: t_end must be a multiple of dt_out");
  }
  if (!(scales.lambda0 > 0 && scales.A_ref >= 1 && scales.gamma0 > 0 && scales.gamma_rate_factor > 0)) {
    throw ConfigError("parameter scales out of range");
  }
  if (!(measure.precision > 0 && measure.noise_sd >= 0)) {
    throw ConfigError("measure: precision must be > 0, noise_sd >= 0");
  }
}

namespace {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_state(const json& j, const char* key, SpeciesState& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != kNumSpecies) {
    throw ConfigError(std::string("expected 6-element array for '") + key + "'");
  }
  for (std::size_t n = 0; n < kNumSpecies; ++n) out[n] = a[n].get<double>();
}

const json& section(const json& root, const char* name) {
  static const json empty = json::object();
  if (!root.contains(name)) return empty;
  const auto& s = root.at(name);
  if (!s.is_object()) throw ConfigError(std::string("section '") + name + "' must be an object");
  return s;
}

json to_json(const ForwardConfig& c) {
  json j;
  j["geometry"] = {{"R", c.geometry.R},
                   {"R_inf", c.geometry.R_inf},
                   {"w", c.geometry.w},
                   {"h", c.geometry.h}};
  j["diffusion"] = {{"interior", c.diffusion.interior}, {"exterior", c.diffusion.exterior}};
  j["initial"] = {{"interior", c.initial.interior}, {"exterior", c.initial.exterior}};
  j["rates"] = {{"k1", c.rates.k1},
                {"k_m1", c.rates.k_m1},
                {"epsilon", c.rates.epsilon},
                {"epsilon_prime", c.rates.epsilon_prime},
                {"K2", c.rates.K2},
                {"K_HA_in", c.rates.K_HA_in},
                {"K_HA_out", c.rates.K_HA_out},
                {"fast_rate_convention",
                 c.rates.convention == FastRateConvention::kReciprocal ? "reciprocal" : "literal"}};
  j["ca"] = {{"A_interior", c.ca.A_interior},
             {"A_surface", c.ca.A_surface},
             {"delta", c.ca.delta}};
  j["mesh"] = {{"interior_nodes", c.mesh.interior_nodes},
               {"exterior_nodes", c.mesh.exterior_nodes},
               {"interior_grading", c.mesh.interior_grading},
               {"exterior_grading", c.mesh.exterior_grading}};
  j["integrator"] = {{"rtol", c.integrator.rtol},
                     {"atol", c.integrator.atol},
                     {"atol_proton", c.integrator.atol_proton},
                     {"initial_step", c.integrator.initial_step},
                     {"min_step", c.integrator.min_step},
                     {"max_step", c.integrator.max_step},
                     {"neg_tol", c.integrator.neg_tol},
                     {"max_steps", c.integrator.max_steps}};
  j["coupling"] = c.coupling == CouplingMode::kOneWay ? "one_way" : "two_way";
  j["experiment"] = {{"t_end", c.experiment.t_end}, {"dt_out", c.experiment.dt_out}};
  j["scales"] = {{"lambda0", c.scales.lambda0},
                 {"A_ref", c.scales.A_ref},
                 {"gamma0", c.scales.gamma0},
                 {"gamma_rate_factor", c.scales.gamma_rate_factor}};
  j["measure"] = {{"pH0", c.measure.pH0},
                  {"precision", c.measure.precision},
                  {"noise_sd", c.measure.noise_sd},
                  {"noise_seed", c.measure.noise_seed}};
  return j;
}

ForwardConfig from_json(const json& root) {
  static const char* known[] = {"geometry",   "diffusion",  "initial", "rates",
                                "ca",         "mesh",       "integrator", "coupling",
                                "experiment", "scales",     "measure", "comment"};
  for (const auto& [key, _] : root.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown config section '" + key + "'");
  }
  ForwardConfig c;
  const auto& g = section(root, "geometry");
  read(g, "R", c.geometry.R);
  read(g, "R_inf", c.geometry.R_inf);
  read(g, "w", c.geometry.w);
  read(g, "h", c.geometry.h);
  const auto& d = section(root, "diffusion");
  read_state(d, "interior", c.diffusion.interior);
  read_state(d, "exterior", c.diffusion.exterior);
  const auto& i0 = section(root, "initial");
  read_state(i0, "interior", c.initial.interior);
  read_state(i0, "exterior", c.initial.exterior);
  const auto& r = section(root, "rates");
  read(r, "k1", c.rates.k1);
  read(r, "k_m1", c.rates.k_m1);
  read(r, "epsilon", c.rates.epsilon);
  read(r, "epsilon_prime", c.rates.epsilon_prime);
  read(r, "K2", c.rates.K2);
  read(r, "K_HA_in", c.rates.K_HA_in);
  read(r, "K_HA_out", c.rates.K_HA_out);
  if (r.contains("fast_rate_convention")) {
    const auto s = r.at("fast_rate_convention").get<std::string>();
    if (s == "reciprocal") {
      c.rates.convention = FastRateConvention::kReciprocal;
    } else if (s == "literal") {
      c.rates.convention = FastRateConvention::kLiteral;
    } else {
      throw ConfigError("fast_rate_convention must be 'reciprocal' or 'literal'");
    }
  }
  const auto& ca = section(root, "ca");
  read(ca, "A_interior", c.ca.A_interior);
  read(ca, "A_surface", c.ca.A_surface);
  read(ca, "delta", c.ca.delta);
  const auto& m = section(root, "mesh");
  read(m, "interior_nodes", c.mesh.interior_nodes);
  read(m, "exterior_nodes", c.mesh.exterior_nodes);
  read(m, "interior_grading", c.mesh.interior_grading);
  read(m, "exterior_grading", c.mesh.exterior_grading);
  const auto& it = section(root, "integrator");
  read(it, "rtol", c.integrator.rtol);
  read(it, "atol", c.integrator.atol);
  read(it, "atol_proton", c.integrator.atol_proton);
  read(it, "initial_step", c.integrator.initial_step);
  read(it, "min_step", c.integrator.min_step);
  read(it, "max_step", c.integrator.max_step);
  read(it, "neg_tol", c.integrator.neg_tol);
  read(it, "max_steps", c.integrator.max_steps);
  if (root.contains("coupling")) {
    const auto s = root.at("coupling").get<std::string>();
    if (s == "one_way") {
      c.coupling = CouplingMode::kOneWay;
    } else if (s == "two_way") {
      c.coupling = CouplingMode::kTwoWay;
    } else {
      throw ConfigError("coupling must be 'one_way' or 'two_way'");
    }
  }
  const auto& e = section(root, "experiment");
  read(e, "t_end", c.experiment.t_end);
  read(e, "dt_out", c.experiment.dt_out);
  const auto& s = section(root, "scales");
  read(s, "lambda0", c.scales.lambda0);
  read(s, "A_ref", c.scales.A_ref);
  read(s, "gamma0", c.scales.gamma0);
  read(s, "gamma_rate_factor", c.scales.gamma_rate_factor);
  const auto& me = section(root, "measure");
  read(me, "pH0", c.measure.pH0);
  read(me, "precision", c.measure.precision);
  read(me, "noise_sd", c.measure.noise_sd);
  read(me, "noise_seed", c.measure.noise_seed);
  c.validate();
  return c;
}

}  // namespace

ForwardConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end(), nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");
  try {
    return from_json(root);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
}

ForwardConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ForwardConfig& config) {
  // nlohmann::json keeps object keys sorted and prints doubles round-trip.
  return to_json(config).dump(2);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string config_hash(const ForwardConfig& config) {
  return hex64(fnv1a64(to_json(config).dump()));
}

}  // namespace cellph
