#include "cellph/forward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cellph/errors.hpp"

namespace cellph {

namespace {

// int_lo^hi r^2 (alpha + beta r) dr
double weighted_linear_integral(double lo, double hi, double alpha, double beta) {
  return alpha * (hi * hi * hi - lo * lo * lo) / 3.0 +
         beta * (hi * hi * hi * hi - lo * lo * lo * lo) / 4.0;
}

// Lumped r^2 mass of the two hat functions on [a, b], restricted to [lo, hi].
std::pair<double, double> element_mass(double a, double b, double lo, double hi) {
  lo = std::max(lo, a);
  hi = std::min(hi, b);
  if (hi <= lo) return {0.0, 0.0};
  const double L = b - a;
  // N_a = (b - r)/L, N_b = (r - a)/L
  return {weighted_linear_integral(lo, hi, b / L, -1.0 / L),
          weighted_linear_integral(lo, hi, -a / L, 1.0 / L)};
}

double element_stiffness(double a, double b) {
  const double L = b - a;
  return (b * b * b - a * a * a) / (3.0 * L * L);
}

void check_nonnegative(const SpeciesState& u, const char* what) {
  for (double c : u) {
    if (!(c >= 0.0)) throw std::domain_error(std::string("compartment_rhs: negative ") + what);
  }
}

}  // namespace

double compartment_exchange_rate(const PhysicalParams& params, const ForwardConfig& config) {
  return 2.0 * config.scales.gamma_rate_factor * params.gamma / config.geometry.w;
}

SpeciesState compartment_rhs(const SpeciesState& u0, const SpeciesState& u_minus_R,
                             const SpeciesState& u_plus_R, const PhysicalParams& params,
                             const ForwardConfig& config) {
  check_nonnegative(u0, "compartment state");
  check_nonnegative(u_minus_R, "interior membrane state");
  check_nonnegative(u_plus_R, "exterior membrane state");
  const Geometry& geom = config.geometry;
  SpeciesState out = detail::net_rate(u0, config.rates.side(Side::kExterior), params.A0);
  const double exchange = compartment_exchange_rate(params, config);
  for (std::size_t n = 0; n < kNumSpecies; ++n) out[n] += exchange * (u_plus_R[n] - u0[n]);
  out[kCO2] -= (params.lambda / geom.h) * (u0[kCO2] - u_minus_R[kCO2]);
  return out;
}

SemidiscreteSystem::SemidiscreteSystem(const ForwardConfig& config, RadialMesh mesh,
                                       const PhysicalParams& params)
    : mesh_(std::move(mesh)),
      geom_(config.geometry),
      params_(params),
      rates_in_(config.rates.side(Side::kInterior)),
      rates_out_(config.rates.side(Side::kExterior)),
      kappa_(config.diffusion),
      initial_(config.initial),
      coupling_(config.coupling),
      dirichlet_(config.initial.exterior) {
  const std::size_t ni = mesh_.interior.size();
  const std::size_t ne = mesh_.exterior.size();
  mass_.assign(bulk_nodes(), 0.0);
  ca_.assign(bulk_nodes(), 0.0);
  elem_coef_.clear();

  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e + 1 < ni; ++e) {
    const double a = mesh_.interior[e], b = mesh_.interior[e + 1];
    const auto [ma, mb] = element_mass(a, b, -inf, inf);
    mass_[e] += ma;
    mass_[e + 1] += mb;
    elem_coef_.push_back(element_stiffness(a, b));
  }
  for (std::size_t g = 0; g < ni; ++g) ca_[g] = config.ca.A_interior;

  const double layer_end = geom_.R + config.ca.delta;
  std::vector<double> ca_mass(bulk_nodes(), 0.0);
  for (std::size_t e = 0; e + 1 < ne; ++e) {
    const double a = mesh_.exterior[e], b = mesh_.exterior[e + 1];
    const auto [ma, mb] = element_mass(a, b, -inf, inf);
    const auto [la, lb] = element_mass(a, b, -inf, layer_end);
    const std::size_t ga = ni + e, gb = ni + e + 1;
    // The Dirichlet node carries no unknown.
    mass_[ga] += ma;
    ca_mass[ga] += ma + (config.ca.A_surface - 1.0) * la;
    if (gb < bulk_nodes()) {
      mass_[gb] += mb;
      ca_mass[gb] += mb + (config.ca.A_surface - 1.0) * lb;
    }
    elem_coef_.push_back(element_stiffness(a, b));
  }
  for (std::size_t g = ni; g < bulk_nodes(); ++g) ca_[g] = ca_mass[g] / mass_[g];

  exchange_rate_ = compartment_exchange_rate(params_, config);
  comp_volume_weight_ = geom_.w * geom_.w * geom_.h / 4.0;  // (pi w^2 h) / (4 pi)
}

double SemidiscreteSystem::radius(std::size_t node) const {
  return node < interior_nodes() ? mesh_.interior[node]
                                 : mesh_.exterior[node - interior_nodes()];
}

std::vector<double> SemidiscreteSystem::initial_state() const {
  std::vector<double> y(size());
  for (std::size_t g = 0; g < bulk_nodes(); ++g) {
    const auto& src = is_interior(g) ? initial_.interior : initial_.exterior;
    for (std::size_t n = 0; n < kNumSpecies; ++n) y[dof(g, n)] = src[n];
  }
  for (std::size_t n = 0; n < kNumSpecies; ++n) y[compartment_dof(n)] = initial_.exterior[n];
  return y;
}

void SemidiscreteSystem::rhs(std::span<const double> y, std::span<double> dydt) const {
  const std::size_t ni = interior_nodes();
  const std::size_t nb = bulk_nodes();
  std::fill(dydt.begin(), dydt.end(), 0.0);

  // Diffusion fluxes, element by element.
  for (std::size_t e = 0; e + 1 < ni; ++e) {
    const double c = elem_coef_[e];
    for (std::size_t n = 0; n < kNumSpecies; ++n) {
      const double flux = kappa_.interior[n] * c * (y[dof(e + 1, n)] - y[dof(e, n)]);
      dydt[dof(e, n)] += flux;
      dydt[dof(e + 1, n)] -= flux;
    }
  }
  const std::size_t ne = mesh_.exterior.size();
  for (std::size_t e = 0; e + 1 < ne; ++e) {
    const double c = elem_coef_[ni - 1 + e];
    const std::size_t ga = ni + e, gb = ni + e + 1;
    for (std::size_t n = 0; n < kNumSpecies; ++n) {
      const double ub = gb < nb ? y[dof(gb, n)] : dirichlet_[n];
      const double flux = kappa_.exterior[n] * c * (ub - y[dof(ga, n)]);
      dydt[dof(ga, n)] += flux;
      if (gb < nb) dydt[dof(gb, n)] -= flux;
    }
  }

  const std::size_t gi = membrane_interior_node(), go = membrane_exterior_node();
  const double J = membrane_flux(y);
  dydt[dof(gi, kCO2)] += J;
  dydt[dof(go, kCO2)] -= J;

  SpeciesState u0, um, up;
  for (std::size_t n = 0; n < kNumSpecies; ++n) {
    u0[n] = y[compartment_dof(n)];
    um[n] = y[dof(gi, n)];
    up[n] = y[dof(go, n)];
  }
  if (coupling_ == CouplingMode::kTwoWay) {
    const double w = comp_volume_weight_;
    dydt[dof(gi, kCO2)] += w * (params_.lambda / geom_.h) * (u0[kCO2] - um[kCO2]);
    const double ex = w * exchange_rate_;
    for (std::size_t n = 0; n < kNumSpecies; ++n) dydt[dof(go, n)] -= ex * (up[n] - u0[n]);
  }

  // Mass matrix inverse and nodal reactions.
  SpeciesState u;
  for (std::size_t g = 0; g < nb; ++g) {
    const double inv_m = 1.0 / mass_[g];
    for (std::size_t n = 0; n < kNumSpecies; ++n) u[n] = y[dof(g, n)];
    const SpeciesState r = detail::net_rate(u, is_interior(g) ? rates_in_ : rates_out_, ca_[g]);
    for (std::size_t n = 0; n < kNumSpecies; ++n) {
      dydt[dof(g, n)] = dydt[dof(g, n)] * inv_m + r[n];
    }
  }

  // Compartment, evaluated without the domain checks of compartment_rhs.
  SpeciesState c = detail::net_rate(u0, rates_out_, params_.A0);
  const double exchange = exchange_rate_;
  for (std::size_t n = 0; n < kNumSpecies; ++n) c[n] += exchange * (up[n] - u0[n]);
  c[kCO2] -= (params_.lambda / geom_.h) * (u0[kCO2] - um[kCO2]);
  for (std::size_t n = 0; n < kNumSpecies; ++n) dydt[compartment_dof(n)] = c[n];
}

void SemidiscreteSystem::shifted_jacobian(std::span<const double> y, double sigma, BandedLU& A,
                                          Border& border) const {
  const std::size_t ni = interior_nodes();
  const std::size_t nb = bulk_nodes();
  const std::size_t ne = mesh_.exterior.size();
  A.set_zero();

  // -J of the diffusion part, scaled by the inverse lumped mass per row.
  auto couple = [&](std::size_t ga, std::size_t gb, double kc, std::size_t n) {
    // flux = kc (u_b - u_a): d(row a)/du_a = -kc/m_a, d(row a)/du_b = kc/m_a
    const double ia = 1.0 / mass_[ga];
    A.at(dof(ga, n), dof(ga, n)) += kc * ia;
    if (gb < nb) {
      const double ib = 1.0 / mass_[gb];
      A.at(dof(ga, n), dof(gb, n)) -= kc * ia;
      A.at(dof(gb, n), dof(gb, n)) += kc * ib;
      A.at(dof(gb, n), dof(ga, n)) -= kc * ib;
    }
  };
  for (std::size_t e = 0; e + 1 < ni; ++e) {
    for (std::size_t n = 0; n < kNumSpecies; ++n) {
      couple(e, e + 1, kappa_.interior[n] * elem_coef_[e], n);
    }
  }
  for (std::size_t e = 0; e + 1 < ne; ++e) {
    for (std::size_t n = 0; n < kNumSpecies; ++n) {
      couple(ni + e, ni + e + 1, kappa_.exterior[n] * elem_coef_[ni - 1 + e], n);
    }
  }
  const std::size_t gi = membrane_interior_node(), go = membrane_exterior_node();
  const double lR2 = params_.lambda * geom_.R * geom_.R;
  A.at(dof(gi, kCO2), dof(gi, kCO2)) += lR2 / mass_[gi];
  A.at(dof(gi, kCO2), dof(go, kCO2)) -= lR2 / mass_[gi];
  A.at(dof(go, kCO2), dof(go, kCO2)) += lR2 / mass_[go];
  A.at(dof(go, kCO2), dof(gi, kCO2)) -= lR2 / mass_[go];

  SpeciesState u;
  for (std::size_t g = 0; g < nb; ++g) {
    for (std::size_t n = 0; n < kNumSpecies; ++n) u[n] = y[dof(g, n)];
    const auto J = detail::net_rate_jacobian(u, is_interior(g) ? rates_in_ : rates_out_, ca_[g]);
    for (std::size_t r = 0; r < kNumSpecies; ++r) {
      for (std::size_t c = 0; c < kNumSpecies; ++c) {
        if (J[r][c] != 0.0) A.at(dof(g, r), dof(g, c)) -= J[r][c];
      }
      A.at(dof(g, r), dof(g, r)) += sigma;
    }
  }

  // Border blocks; local bulk index k < 6 is node gi, k >= 6 is node go.
  border = Border{};
  const double lh = params_.lambda / geom_.h;
  const double ex = exchange_rate_;
  border.comp_bulk[kCO2][kCO2] = -lh;
  for (std::size_t n = 0; n < kNumSpecies; ++n) border.comp_bulk[n][kNumSpecies + n] = -ex;
  SpeciesState u0;
  for (std::size_t n = 0; n < kNumSpecies; ++n) u0[n] = y[compartment_dof(n)];
  const auto Jc = detail::net_rate_jacobian(u0, rates_out_, params_.A0);
  for (std::size_t r = 0; r < kNumSpecies; ++r) {
    for (std::size_t c = 0; c < kNumSpecies; ++c) border.comp_comp[r][c] = -Jc[r][c];
    border.comp_comp[r][r] += sigma + ex;
  }
  border.comp_comp[kCO2][kCO2] += lh;

  if (coupling_ == CouplingMode::kTwoWay) {
    const double w = comp_volume_weight_;
    const double cl = w * lh / mass_[gi];
    A.at(dof(gi, kCO2), dof(gi, kCO2)) += cl;
    border.bulk_comp[kCO2][kCO2] = -cl;
    const double cg = w * ex / mass_[go];
    for (std::size_t n = 0; n < kNumSpecies; ++n) {
      A.at(dof(go, n), dof(go, n)) += cg;
      border.bulk_comp[kNumSpecies + n][n] = -cg;
    }
  }
}

std::vector<double> SemidiscreteSystem::stiffness_dense(std::size_t species) const {
  const std::size_t ni = interior_nodes();
  const std::size_t N = bulk_nodes() + 1;
  std::vector<double> K(N * N, 0.0);
  auto add = [&](std::size_t a, std::size_t b, double kc) {
    K[a * N + a] += kc;
    K[b * N + b] += kc;
    K[a * N + b] -= kc;
    K[b * N + a] -= kc;
  };
  for (std::size_t e = 0; e + 1 < ni; ++e) add(e, e + 1, kappa_.interior[species] * elem_coef_[e]);
  for (std::size_t e = 0; e + 1 < mesh_.exterior.size(); ++e) {
    add(ni + e, ni + e + 1, kappa_.exterior[species] * elem_coef_[ni - 1 + e]);
  }
  return K;
}

double SemidiscreteSystem::membrane_flux(std::span<const double> y) const {
  return params_.lambda * geom_.R * geom_.R *
         (y[dof(membrane_exterior_node(), kCO2)] - y[dof(membrane_interior_node(), kCO2)]);
}

double SemidiscreteSystem::interior_amount(std::span<const double> y,
                                           std::initializer_list<std::size_t> species) const {
  double acc = 0.0;
  for (std::size_t g = 0; g < interior_nodes(); ++g) {
    for (std::size_t n : species) acc += mass_[g] * y[dof(g, n)];
  }
  return acc;
}

double SemidiscreteSystem::exterior_amount(std::span<const double> y,
                                           std::initializer_list<std::size_t> species) const {
  double acc = 0.0;
  for (std::size_t g = interior_nodes(); g < bulk_nodes(); ++g) {
    for (std::size_t n : species) acc += mass_[g] * y[dof(g, n)];
  }
  return acc;
}

SemidiscreteSystem assemble(const ForwardConfig& config, const RadialMesh& mesh,
                            const PhysicalParams& params) {
  config.validate();
  params.validate();
  mesh.validate(config.geometry, config.ca.delta);
  return SemidiscreteSystem(config, mesh, params);
}

ForwardOde::ForwardOde(const SemidiscreteSystem& system)
    : system_(system), bulk_(system.bulk_size(), kNumSpecies, kNumSpecies) {}

bool ForwardOde::factor(std::span<const double> y, double sigma) {
  system_.shifted_jacobian(y, sigma, bulk_, border_);
  if (!bulk_.factor()) return false;

  const std::size_t nb = system_.bulk_size();
  const std::size_t off = system_.dof(system_.membrane_interior_node(), 0);
  Eigen::Matrix<double, 6, 6> S;
  for (std::size_t r = 0; r < kNumSpecies; ++r) {
    for (std::size_t c = 0; c < kNumSpecies; ++c) S(r, c) = border_.comp_comp[r][c];
  }
  if (system_.coupling() == CouplingMode::kTwoWay) {
    z_.setZero(static_cast<Eigen::Index>(nb), 6);
    for (std::size_t k = 0; k < 2 * kNumSpecies; ++k) {
      for (std::size_t c = 0; c < kNumSpecies; ++c) z_(off + k, c) = border_.bulk_comp[k][c];
    }
    bulk_.solve(std::span<double>(z_.data(), nb * kNumSpecies), kNumSpecies);
    // S = D - C Z, C nonzero only on the 12 membrane dofs.
    for (std::size_t r = 0; r < kNumSpecies; ++r) {
      for (std::size_t c = 0; c < kNumSpecies; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 2 * kNumSpecies; ++k) {
          acc += border_.comp_bulk[r][k] * z_(off + k, c);
        }
        S(r, c) -= acc;
      }
    }
  }
  schur_.compute(S);
  return std::abs(schur_.determinant()) > 0.0;
}

void ForwardOde::solve(std::span<double> v) const {
  const std::size_t nb = system_.bulk_size();
  const std::size_t off = system_.dof(system_.membrane_interior_node(), 0);
  bulk_.solve(v.subspan(0, nb));
  Eigen::Matrix<double, 6, 1> rc;
  for (std::size_t r = 0; r < kNumSpecies; ++r) {
    double acc = v[nb + r];
    for (std::size_t k = 0; k < 2 * kNumSpecies; ++k) acc -= border_.comp_bulk[r][k] * v[off + k];
    rc(r) = acc;
  }
  const Eigen::Matrix<double, 6, 1> xc = schur_.solve(rc);
  for (std::size_t r = 0; r < kNumSpecies; ++r) v[nb + r] = xc(r);
  if (system_.coupling() == CouplingMode::kTwoWay) {
    for (std::size_t i = 0; i < nb; ++i) {
      double acc = 0.0;
      for (std::size_t c = 0; c < kNumSpecies; ++c) acc += z_(i, c) * xc(c);
      v[i] -= acc;
    }
  }
}

std::vector<double> SimulationResult::compartment_ph() const {
  std::vector<double> ph(compartment.size());
  for (std::size_t i = 0; i < compartment.size(); ++i) ph[i] = ph_from_mM(compartment[i][kH]);
  return ph;
}

SimulationResult integrate(const SemidiscreteSystem& system, const ForwardConfig& config,
                           const SimulationOptions& options) {
  return integrate(system, config, system.initial_state(), options);
}

SimulationResult integrate(const SemidiscreteSystem& system, const ForwardConfig& config,
                           std::vector<double> y0, const SimulationOptions& options) {
  const std::size_t frames = config.experiment.frame_count();
  SimulationResult result;
  result.times.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    result.times[i] = static_cast<double>(i) * config.experiment.dt_out;
  }
  result.compartment.resize(frames);
  if (options.store_bulk) result.bulk.resize(frames);

  std::vector<double> atol(system.size(), config.integrator.atol * options.tolerance_scale);
  for (std::size_t g = 0; g < system.bulk_nodes(); ++g) {
    atol[system.dof(g, kH)] = config.integrator.atol_proton * options.tolerance_scale;
  }
  atol[system.compartment_dof(kH)] = config.integrator.atol_proton * options.tolerance_scale;
  StepControl control = StepControl::from(config.integrator, std::move(atol), true);
  control.rtol *= options.tolerance_scale;
  control.max_step = std::min(control.max_step, config.experiment.dt_out);

  ForwardOde ode(system);
  result.stats = integrate_rodas3(
      ode, std::move(y0), result.times, control,
      [&](std::size_t frame, double, std::span<const double> y) {
        for (std::size_t n = 0; n < kNumSpecies; ++n) {
          result.compartment[frame][n] = y[system.compartment_dof(n)];
        }
        if (options.store_bulk) result.bulk[frame].assign(y.begin(), y.end());
      });
  return result;
}

SimulationResult simulate(const ForwardConfig& config, const PhysicalParams& params,
                          const SimulationOptions& options) {
  const RadialMesh mesh = RadialMesh::graded(config.geometry, config.mesh);
  const SemidiscreteSystem system = assemble(config, mesh, params);
  return integrate(system, config, options);
}

std::vector<double> simulate_ph(const ForwardConfig& config, const ParamVector& xi) {
  return simulate(config, map_params(xi, config.scales)).compartment_ph();
}

}  // namespace cellph
