#pragma once

// Species, reaction network and mass-action kinetics of the CO2 / bicarbonate
// / buffer system, with carbonic-anhydrase (CA) enhancement of reaction 1.

#include <array>
#include <cstddef>
#include <string>

namespace cellph {

inline constexpr std::size_t kNumSpecies = 6;
inline constexpr std::size_t kNumFluxes = 6;

// u1..u6 in the usual ordering, zero-based.
enum Species : std::size_t { kCO2 = 0, kH2CO3 = 1, kHCO3 = 2, kH = 3, kHA = 4, kA = 5 };

enum class Side { kInterior, kExterior };

using SpeciesState = std::array<double, kNumSpecies>;  // mM
using FluxVector = std::array<double, kNumFluxes>;     // mM/s
using SpeciesJacobian = std::array<std::array<double, kNumSpecies>, kNumSpecies>;

/// pH of a proton concentration given in mM (pH = -log10(u * 1e-3 M/mM)).
double ph_from_mM(double h_mM);
double mM_from_ph(double ph);

/// How the printed "fast rate" constants eps, eps' become rate constants.
/// kReciprocal: k2 = 1/eps, k3 = 1/eps'. kLiteral: k2 = eps, k3 = eps'.
enum class FastRateConvention { kReciprocal, kLiteral };

struct SideRates {
  double k1 = 0.0;    // CO2 -> H2CO3, 1/s
  double k_m1 = 0.0;  // H2CO3 -> CO2, 1/s
  double k2 = 0.0;    // H2CO3 -> HCO3- + H+, 1/s
  double k_m2 = 0.0;  // HCO3- + H+ -> H2CO3, 1/(mM s)
  double k3 = 0.0;    // HA -> A- + H+, 1/s
  double k_m3 = 0.0;  // A- + H+ -> HA, 1/(mM s)
};

/// Rate constants for both sides of the membrane, derived from the tabulated
/// values. Buffer dissociation differs per side through K_HA.
struct RateTable {
  double k1 = 0.0302;
  double k_m1 = 10.9631;
  double epsilon = 1e-9;
  double epsilon_prime = 1e-6;
  double K2 = 0.2407;
  double K_HA_in = 7.9433e-5;
  double K_HA_out = 3.1623e-5;
  FastRateConvention convention = FastRateConvention::kReciprocal;

  /// Throws ConfigError on non-positive entries.
  void validate() const;
  SideRates side(Side s) const;
};

/// CA acceleration factors. A0 lives in the sensor compartment and is an
/// estimation unknown, so it is carried by PhysicalParams instead.
struct CaProfile {
  double A_interior = 20.0;
  double A_surface = 20.0;
  double delta = 5.0;  // um, thickness of the CA-enriched exterior layer

  void validate() const;
};

/// S(n, j): contribution of flux j to the rate of species n.
inline constexpr std::array<std::array<int, kNumFluxes>, kNumSpecies> kStoichiometry{{
    {-1, 1, 0, 0, 0, 0},
    {1, -1, -1, 1, 0, 0},
    {0, 0, 1, -1, 0, 0},
    {0, 0, 1, -1, 1, -1},
    {0, 0, 0, 0, -1, 1},
    {0, 0, 0, 0, 1, -1},
}};

/// Mass-action fluxes phi1..phi6. Throws std::domain_error on negative
/// concentrations or ca_factor < 1.
FluxVector mass_action_fluxes(const SpeciesState& u, const SideRates& rates, double ca_factor);

/// S * phi.
SpeciesState net_species_rate(const SpeciesState& u, const SideRates& rates, double ca_factor);

// Unchecked kernels used inside the time integrator, where undershoots of
// order the absolute tolerance are expected.
namespace detail {

inline FluxVector fluxes(const SpeciesState& u, const SideRates& r, double ca) {
  return {ca * r.k1 * u[kCO2],          ca * r.k_m1 * u[kH2CO3],
          r.k2 * u[kH2CO3],             r.k_m2 * u[kHCO3] * u[kH],
          r.k3 * u[kHA],                r.k_m3 * u[kA] * u[kH]};
}

inline SpeciesState net_rate(const SpeciesState& u, const SideRates& r, double ca) {
  const FluxVector phi = fluxes(u, r, ca);
  const double r1 = phi[0] - phi[1];
  const double r2 = phi[2] - phi[3];
  const double r3 = phi[4] - phi[5];
  return {-r1, r1 - r2, r2, r2 + r3, -r3, r3};
}

/// d(net_rate)/du, row = species rate, column = concentration.
inline SpeciesJacobian net_rate_jacobian(const SpeciesState& u, const SideRates& r, double ca) {
  // Partial derivatives of the three net reaction rates.
  std::array<double, kNumSpecies> d1{}, d2{}, d3{};
  d1[kCO2] = ca * r.k1;
  d1[kH2CO3] = -ca * r.k_m1;
  d2[kH2CO3] = r.k2;
  d2[kHCO3] = -r.k_m2 * u[kH];
  d2[kH] = -r.k_m2 * u[kHCO3];
  d3[kHA] = r.k3;
  d3[kA] = -r.k_m3 * u[kH];
  d3[kH] = -r.k_m3 * u[kA];
  SpeciesJacobian J{};
  for (std::size_t c = 0; c < kNumSpecies; ++c) {
    J[kCO2][c] = -d1[c];
    J[kH2CO3][c] = d1[c] - d2[c];
    J[kHCO3][c] = d2[c];
    J[kH][c] = d2[c] + d3[c];
    J[kHA][c] = -d3[c];
    J[kA][c] = d3[c];
  }
  return J;
}

}  // namespace detail

/// Chemical equilibrium with the same side's rates: keeps u3, u4, u5 and
/// sets u2 = u3 u4 / K2, u1 = u2 k_m1 / k1, u6 = K_HA u5 / u4. Used to
/// build exactly stationary initial data.
SpeciesState stationary_state(const SpeciesState& u, const SideRates& rates);

std::string species_name(std::size_t n);

}  // namespace cellph
