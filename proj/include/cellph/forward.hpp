#pragma once

// Spherically symmetric reaction-diffusion model of the cell (interior) and
// the bath (exterior), coupled through a Fick CO2 flux at the membrane, plus
// the lumped well-mixed compartment under the electrode tip.
//
// Space is discretized with linear finite elements in r with r^2 weighting,
// a lumped (row-sum) mass matrix and nodal quadrature for the reactions. The
// bulk unknowns are ordered node-major (6 species per node), so the bulk
// Jacobian is banded with half-bandwidth 6; the 6 compartment unknowns are
// appended and handled as a border.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cellph/banded.hpp"
#include "cellph/chem.hpp"
#include "cellph/config.hpp"
#include "cellph/integrator.hpp"
#include "cellph/mesh.hpp"
#include "cellph/params.hpp"

namespace cellph {

/// d(u0)/dt of the sensor compartment given the bulk values at r = R:
///   -delta_n1 (lambda/h)(u0 - u-(R)) + (2 f gamma / w)(u+(R) - u0) + S phi0(A0)
/// with f = scales.gamma_rate_factor and exterior rate constants.
/// Throws std::domain_error on negative inputs.
SpeciesState compartment_rhs(const SpeciesState& u0, const SpeciesState& u_minus_R,
                             const SpeciesState& u_plus_R, const PhysicalParams& params,
                             const ForwardConfig& config);

/// Exchange rate 2 f gamma / w between compartment and exterior, 1/s.
double compartment_exchange_rate(const PhysicalParams& params, const ForwardConfig& config);

class SemidiscreteSystem {
 public:
  SemidiscreteSystem(const ForwardConfig& config, RadialMesh mesh, const PhysicalParams& params);

  std::size_t interior_nodes() const { return mesh_.interior.size(); }
  /// Bulk nodes carrying unknowns (the Dirichlet node at R_inf is excluded).
  std::size_t bulk_nodes() const { return interior_nodes() + mesh_.exterior.size() - 1; }
  std::size_t bulk_size() const { return kNumSpecies * bulk_nodes(); }
  std::size_t size() const { return bulk_size() + kNumSpecies; }
  std::size_t membrane_interior_node() const { return interior_nodes() - 1; }
  std::size_t membrane_exterior_node() const { return interior_nodes(); }
  std::size_t dof(std::size_t node, std::size_t species) const {
    return kNumSpecies * node + species;
  }
  std::size_t compartment_dof(std::size_t species) const { return bulk_size() + species; }

  /// Radius of a bulk node.
  double radius(std::size_t node) const;
  bool is_interior(std::size_t node) const { return node < interior_nodes(); }

  const RadialMesh& mesh() const { return mesh_; }
  const PhysicalParams& params() const { return params_; }
  const SpeciesState& dirichlet() const { return dirichlet_; }
  std::span<const double> lumped_mass() const { return mass_; }
  std::span<const double> ca_factor() const { return ca_; }
  CouplingMode coupling() const { return coupling_; }

  std::vector<double> initial_state() const;

  /// dy/dt.
  void rhs(std::span<const double> y, std::span<double> dydt) const;

  /// Writes sigma I - J(y): the bulk block into `bulk` (banded) and the
  /// border blocks (bulk-by-compartment, compartment-by-bulk over the two
  /// membrane nodes, compartment-by-compartment).
  struct Border {
    // Rows: 12 bulk dofs of the two membrane nodes; columns: compartment.
    std::array<std::array<double, kNumSpecies>, 2 * kNumSpecies> bulk_comp{};
    // Rows: compartment; columns: 12 bulk dofs of the two membrane nodes.
    std::array<std::array<double, 2 * kNumSpecies>, kNumSpecies> comp_bulk{};
    SpeciesJacobian comp_comp{};
  };
  void shifted_jacobian(std::span<const double> y, double sigma, BandedLU& bulk,
                        Border& border) const;

  /// Per-species diffusion stiffness (r^2 weighted), for inspection/tests.
  /// Row-major dense (bulk_nodes + 1) x (bulk_nodes + 1) including the
  /// Dirichlet node, without membrane coupling.
  std::vector<double> stiffness_dense(std::size_t species) const;

  /// CO2 flux into the cell through the free membrane, R^2 lambda (u+ - u-),
  /// in r^2-weighted units (amount per steradian per second).
  double membrane_flux(std::span<const double> y) const;
  /// Lumped integral of sum of the given species over the interior,
  /// int u r^2 dr.
  double interior_amount(std::span<const double> y, std::initializer_list<std::size_t> species) const;
  double exterior_amount(std::span<const double> y, std::initializer_list<std::size_t> species) const;

 private:
  RadialMesh mesh_;
  Geometry geom_;
  PhysicalParams params_;
  SideRates rates_in_, rates_out_;
  DiffusionTable kappa_;
  InitialState initial_;
  CouplingMode coupling_;
  SpeciesState dirichlet_{};
  std::vector<double> mass_;       // per bulk node
  std::vector<double> ca_;         // effective CA factor per bulk node
  std::vector<double> elem_coef_;  // (r_b^3 - r_a^3) / (3 L^2), interior then exterior
  double exchange_rate_ = 0.0;       // 2 f gamma / w
  double comp_volume_weight_ = 0.0;  // V0 / (4 pi), two-way mode
};

/// Validates the mesh against the CA layer and builds the semi-discrete
/// system. Throws ConfigError if the CA layer is unresolved.
SemidiscreteSystem assemble(const ForwardConfig& config, const RadialMesh& mesh,
                            const PhysicalParams& params);

/// StiffSystem adapter: banded LU for the bulk plus a Schur complement for
/// the compartment border.
class ForwardOde final : public StiffSystem {
 public:
  explicit ForwardOde(const SemidiscreteSystem& system);
  std::size_t size() const override { return system_.size(); }
  void rhs(std::span<const double> y, std::span<double> f) const override { system_.rhs(y, f); }
  bool factor(std::span<const double> y, double sigma) override;
  void solve(std::span<double> v) const override;

 private:
  const SemidiscreteSystem& system_;
  BandedLU bulk_;
  SemidiscreteSystem::Border border_;
  Eigen::MatrixXd z_;  // A^{-1} B, bulk_size x 6 (two-way only)
  Eigen::PartialPivLU<Eigen::Matrix<double, 6, 6>> schur_;
};

struct SimulationOptions {
  bool store_bulk = false;
  /// Scales every tolerance of the integrator (tolerance refinement studies).
  double tolerance_scale = 1.0;
};

struct SimulationResult {
  std::vector<double> times;
  std::vector<SpeciesState> compartment;  // one per frame
  std::vector<std::vector<double>> bulk;  // full states per frame when stored
  IntegratorStats stats;

  std::vector<double> compartment_ph() const;
};

/// Integrates the assembled system over the configured experiment window.
SimulationResult integrate(const SemidiscreteSystem& system, const ForwardConfig& config,
                           const SimulationOptions& options = {});
SimulationResult integrate(const SemidiscreteSystem& system, const ForwardConfig& config,
                           std::vector<double> y0, const SimulationOptions& options);

/// Mesh + assemble + integrate.
SimulationResult simulate(const ForwardConfig& config, const PhysicalParams& params,
                          const SimulationOptions& options = {});

/// Compartment pH trace for dimensionless parameters.
std::vector<double> simulate_ph(const ForwardConfig& config, const ParamVector& xi);

}  // namespace cellph
