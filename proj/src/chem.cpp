#include "cellph/chem.hpp"

#include <cmath>
#include <stdexcept>

#include "cellph/errors.hpp"

namespace cellph {

double ph_from_mM(double h_mM) { return -std::log10(h_mM * 1e-3); }

double mM_from_ph(double ph) { return std::pow(10.0, -ph) * 1e3; }

void RateTable::validate() const {
  if (!(k1 > 0 && k_m1 > 0 && epsilon > 0 && epsilon_prime > 0 && K2 > 0 && K_HA_in > 0 &&
        K_HA_out > 0)) {
    throw ConfigError("rate table: all rates and equilibrium constants must be > 0");
  }
}

SideRates RateTable::side(Side s) const {
  const double fast2 = convention == FastRateConvention::kReciprocal ? 1.0 / epsilon : epsilon;
  const double fast3 =
      convention == FastRateConvention::kReciprocal ? 1.0 / epsilon_prime : epsilon_prime;
  const double K_HA = s == Side::kInterior ? K_HA_in : K_HA_out;
  SideRates r;
  r.k1 = k1;
  r.k_m1 = k_m1;
  r.k2 = fast2;
  r.k_m2 = fast2 / K2;
  r.k3 = fast3;
  r.k_m3 = fast3 / K_HA;
  return r;
}

void CaProfile::validate() const {
  if (!(A_interior >= 1.0 && A_surface >= 1.0)) {
    throw ConfigError("CA factors must be >= 1");
  }
  if (!(delta > 0.0)) throw ConfigError("CA layer thickness must be > 0");
}

FluxVector mass_action_fluxes(const SpeciesState& u, const SideRates& rates, double ca_factor) {
  for (double c : u) {
    if (!(c >= 0.0)) throw std::domain_error("mass_action_fluxes: negative concentration");
  }
  if (!(ca_factor >= 1.0)) throw std::domain_error("mass_action_fluxes: CA factor < 1");
  return detail::fluxes(u, rates, ca_factor);
}

SpeciesState net_species_rate(const SpeciesState& u, const SideRates& rates, double ca_factor) {
  const FluxVector phi = mass_action_fluxes(u, rates, ca_factor);
  SpeciesState out{};
  for (std::size_t n = 0; n < kNumSpecies; ++n) {
    double acc = 0.0;
    for (std::size_t j = 0; j < kNumFluxes; ++j) acc += kStoichiometry[n][j] * phi[j];
    out[n] = acc;
  }
  return out;
}

SpeciesState stationary_state(const SpeciesState& u, const SideRates& r) {
  SpeciesState s = u;
  s[kH2CO3] = u[kHCO3] * u[kH] * r.k_m2 / r.k2;
  s[kCO2] = s[kH2CO3] * r.k_m1 / r.k1;
  s[kA] = u[kHA] * (r.k3 / r.k_m3) / u[kH];
  return s;
}

std::string species_name(std::size_t n) {
  static const char* names[] = {"CO2", "H2CO3", "HCO3", "H", "HA", "A"};
  return n < kNumSpecies ? names[n] : "?";
}

}  // namespace cellph
