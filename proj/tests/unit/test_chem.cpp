#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cellph/chem.hpp"
#include "cellph/config.hpp"
#include "cellph/errors.hpp"
#include "cellph/params.hpp"

using namespace cellph;

TEST(Chem, HydrationRatioMatchesRateConstants) {
  const RateTable t;
  EXPECT_NEAR(t.k1 / t.k_m1, 2.7547e-3, 1e-7);
}

TEST(Chem, DefaultExteriorIsAtHydrationEquilibrium) {
  const InitialState init;
  const RateTable t;
  const double ratio = init.exterior[kH2CO3] / init.exterior[kCO2];
  EXPECT_NEAR(ratio, t.k1 / t.k_m1, 2e-3 * ratio);
}

TEST(Chem, ReciprocalConventionGivesFastRates) {
  RateTable t;
  const SideRates out = t.side(Side::kExterior);
  EXPECT_DOUBLE_EQ(out.k2, 1.0 / t.epsilon);
  EXPECT_DOUBLE_EQ(out.k3, 1.0 / t.epsilon_prime);
  EXPECT_DOUBLE_EQ(out.k2 / out.k_m2, t.K2);
  EXPECT_DOUBLE_EQ(out.k3 / out.k_m3, t.K_HA_out);
  EXPECT_DOUBLE_EQ(t.side(Side::kInterior).k3 / t.side(Side::kInterior).k_m3, t.K_HA_in);

  t.convention = FastRateConvention::kLiteral;
  EXPECT_DOUBLE_EQ(t.side(Side::kExterior).k2, t.epsilon);
}

TEST(Chem, PhConversionRoundTrips) {
  EXPECT_NEAR(ph_from_mM(mM_from_ph(7.5)), 7.5, 1e-14);
  EXPECT_NEAR(ph_from_mM(1e-4), 7.0, 1e-14);
}

TEST(Chem, StationaryStateHasZeroNetRate) {
  const RateTable t;
  for (Side s : {Side::kInterior, Side::kExterior}) {
    const SideRates r = t.side(s);
    const InitialState init;
    const SpeciesState u = stationary_state(s == Side::kInterior ? init.interior : init.exterior, r);
    for (double ca : {1.0, 20.0}) {
      const FluxVector phi = mass_action_fluxes(u, r, ca);
      for (int j = 0; j < 3; ++j) {
        const double scale = std::max(std::abs(phi[2 * j]), std::abs(phi[2 * j + 1]));
        EXPECT_NEAR(phi[2 * j], phi[2 * j + 1], 1e-12 * scale) << "reaction " << j;
      }
    }
  }
}

TEST(Chem, NetRateConservesCarbonAndBuffer) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 10.0);
  const SideRates r = RateTable{}.side(Side::kExterior);
  for (int trial = 0; trial < 100; ++trial) {
    SpeciesState u;
    for (double& v : u) v = U(rng);
    const SpeciesState f = net_species_rate(u, r, 1.0 + U(rng));
    const double scale = std::abs(f[0]) + std::abs(f[1]) + std::abs(f[2]) + 1.0;
    EXPECT_NEAR(f[kCO2] + f[kH2CO3] + f[kHCO3], 0.0, 1e-12 * scale);
    EXPECT_NEAR(f[kHA] + f[kA], 0.0, 1e-12 * (std::abs(f[kHA]) + 1.0));
    // Charge: H+ is produced with either HCO3- or A-.
    EXPECT_NEAR(f[kH] - f[kHCO3] - f[kA], 0.0, 1e-12 * (std::abs(f[kH]) + scale));
  }
}

TEST(Chem, JacobianMatchesFiniteDifferences) {
  const SideRates r = RateTable{}.side(Side::kInterior);
  const SpeciesState u{0.3, 0.002, 9.0, 4e-5, 12.0, 15.0};
  const double ca = 5.0;
  const SpeciesJacobian J = detail::net_rate_jacobian(u, r, ca);
  // Each rate is affine in any single concentration, so a wide central
  // difference is exact up to rounding.
  for (std::size_t c = 0; c < kNumSpecies; ++c) {
    const double h = 0.1 * u[c];
    SpeciesState up = u, dn = u;
    up[c] += h;
    dn[c] -= h;
    const SpeciesState fu = detail::net_rate(up, r, ca), fd = detail::net_rate(dn, r, ca);
    for (std::size_t n = 0; n < kNumSpecies; ++n) {
      const double fdj = (fu[n] - fd[n]) / (2 * h);
      EXPECT_NEAR(J[n][c], fdj, 1e-6 * std::max(1.0, std::abs(fdj))) << n << "," << c;
    }
  }
}

TEST(Chem, RejectsNegativeConcentrationsAndCaBelowOne) {
  const SideRates r = RateTable{}.side(Side::kExterior);
  SpeciesState u{1, 1, 1, 1, 1, 1};
  EXPECT_THROW(mass_action_fluxes(u, r, 0.5), std::domain_error);
  u[kH] = -1e-3;
  EXPECT_THROW(mass_action_fluxes(u, r, 1.0), std::domain_error);
}

TEST(Params, ExperimentTranslations) {
  struct Case {
    ParamVector xi;
    double lambda, A0, log10_gamma;
  };
  const Case cases[] = {
      {{0.9, 0.8, 0.8}, 30.78, 16.0, -4.2},
      {{0.8, 1.0, 2.0 / 3.0}, 27.36, 20.0, -4.0},
      {{0.8, 0.8, 0.7667}, 27.36, 16.0, -4.15},
  };
  for (const auto& c : cases) {
    const PhysicalParams p = map_params(c.xi);
    EXPECT_NEAR(p.lambda, c.lambda, 5e-4 * c.lambda);
    EXPECT_NEAR(p.A0, c.A0, 5e-4 * c.A0);
    EXPECT_NEAR(std::log10(p.gamma), c.log10_gamma, 5e-4);
  }
}

TEST(Params, OutOfBoxIsRejected) {
  EXPECT_THROW(map_params({1.1, 0.5, 0.5}), std::domain_error);
  EXPECT_THROW(map_params({0.5, -0.1, 0.5}), std::domain_error);
  EXPECT_NO_THROW(map_params({0.0, 0.0, 0.0}));
  EXPECT_NO_THROW(map_params({1.0, 1.0, 1.0}));
}

TEST(Params, GammaSpansOneAndAHalfDecades) {
  EXPECT_NEAR(std::log10(map_params({0.5, 0.5, 0.0}).gamma), -3.0, 1e-12);
  EXPECT_NEAR(std::log10(map_params({0.5, 0.5, 1.0}).gamma), -4.5, 1e-12);
}

TEST(Config, JsonRoundTripPreservesHash) {
  ForwardConfig c;
  c.mesh.interior_nodes = 33;
  c.scales.gamma_rate_factor = 1.0;
  const ForwardConfig back = parse_config(dump_config(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_NE(config_hash(back), config_hash(ForwardConfig{}));
}

TEST(Config, InvalidValuesAreConfigErrors) {
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  ForwardConfig c;
  c.geometry.R_inf = c.geometry.R;
  EXPECT_THROW(c.validate(), ConfigError);
}
