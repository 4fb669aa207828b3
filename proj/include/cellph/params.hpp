#pragma once

#include "cellph/config.hpp"

namespace cellph {

/// Dimensionless unknowns xi = (xi_lambda, xi_A, xi_gamma), each in [0, 1].
struct ParamVector {
  double lambda = 0.0;
  double A = 0.0;
  double gamma = 0.0;

  bool operator==(const ParamVector&) const = default;
};

struct PhysicalParams {
  double lambda = 0.0;  // membrane CO2 permeability, um/s
  double A0 = 1.0;      // CA factor in the sensor compartment
  double gamma = 0.0;   // quenching factor, um/s

  void validate() const;
};

/// lambda = xi_l * lambda0, A0 = xi_A * A_ref,
/// gamma = gamma0 * 10^(-0.5 xi_g + (1 - xi_g)).
/// Throws std::domain_error if any component is outside [0, 1].
PhysicalParams map_params(const ParamVector& xi, const ParamScales& scales = {});

}  // namespace cellph
