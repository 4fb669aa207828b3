#pragma once

// Model configuration: geometry, transport, chemistry, mesh and integrator
// settings. Serialized as JSON; see config/default.json for the documented
// defaults.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "cellph/chem.hpp"

namespace cellph {

struct Geometry {
  double R = 650.0;      // cell radius, um
  double R_inf = 800.0;  // truncation radius, um
  double w = 10.0;       // electrode tip radius, um
  double h = 10.0;       // tip-membrane distance, um

  void validate() const;
};

struct DiffusionTable {
  // um^2/s
  SpeciesState interior{1.71e3, 1.11e3, 1.11e3, 8.69e3, 1.56e3, 1.56e3};
  SpeciesState exterior{1.71e3, 1.11e3, 1.11e3, 8.69e3, 1.56e3, 1.56e3};
};

struct InitialState {
  // mM
  SpeciesState interior{0.0, 0.0, 0.0, 6.310e-5, 12.09, 15.22};
  SpeciesState exterior{0.4720, 0.0013, 9.901, 3.162e-5, 2.500, 2.500};
};

struct MeshSpec {
  int interior_nodes = 60;
  int exterior_nodes = 80;
  // Ratio of consecutive element lengths, elements shrinking toward r = R.
  double interior_grading = 1.05;
  double exterior_grading = 1.03;
};

struct IntegratorSettings {
  double rtol = 1e-6;
  double atol = 1e-9;         // mM
  double atol_proton = 1e-9;  // mM, separate so H+ (~3e-5 mM) can be tightened
  double initial_step = 1e-6;
  double min_step = 1e-13;
  double max_step = 0.5;
  // Undershoots above -neg_tol are clamped to 0; deeper ones reject the step.
  double neg_tol = 1e-10;
  long max_steps = 2'000'000;
};

enum class CouplingMode {
  kOneWay,  // compartment reads the bulk at r = R but does not feed back
  kTwoWay,  // compartment exchanges feed back into the bulk, area weighted
};

struct ExperimentSpec {
  double t_end = 500.0;
  double dt_out = 0.5;

  std::size_t frame_count() const;
};

/// Scales mapping the dimensionless unknowns to physical parameters.
struct ParamScales {
  double lambda0 = 34.2;  // um/s
  double A_ref = 20.0;
  double gamma0 = 1e-4;  // um/s
  // Multiplies gamma in the compartment-exterior exchange 2 gamma / w. The
  // default reads gamma0 as 1e-4 mm/s; 1 gives the literal um/s reading.
  double gamma_rate_factor = 1e3;
};

struct MeasureSpec {
  double pH0 = 7.5;
  double precision = 0.02;
  double noise_sd = 0.0;  // optional Gaussian pH noise before quantization, off by default
  std::uint64_t noise_seed = 0;
};

struct ForwardConfig {
  Geometry geometry;
  DiffusionTable diffusion;
  InitialState initial;
  RateTable rates;
  CaProfile ca;
  MeshSpec mesh;
  IntegratorSettings integrator;
  CouplingMode coupling = CouplingMode::kOneWay;
  ExperimentSpec experiment;
  ParamScales scales;
  MeasureSpec measure;

  /// Throws ConfigError.
  void validate() const;
};

ForwardConfig parse_config(std::string_view json_text);
ForwardConfig load_config(const std::filesystem::path& path);
/// Canonical JSON (sorted keys, round-trip precision).
std::string dump_config(const ForwardConfig& config);
/// FNV-1a 64 of the canonical dump, as 16 hex digits.
std::string config_hash(const ForwardConfig& config);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace cellph
