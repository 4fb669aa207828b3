#include "cellph/params.hpp"

#include <cmath>
#include <stdexcept>

#include "cellph/errors.hpp"

namespace cellph {

void PhysicalParams::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(A0 >= 1.0)) throw ConfigError("A0 must be >= 1");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
}

PhysicalParams map_params(const ParamVector& xi, const ParamScales& scales) {
  for (double v : {xi.lambda, xi.A, xi.gamma}) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("map_params: component outside [0, 1]");
  }
  PhysicalParams p;
  p.lambda = xi.lambda * scales.lambda0;
  p.A0 = xi.A * scales.A_ref;
  p.gamma = scales.gamma0 * std::pow(10.0, -0.5 * xi.gamma + (1.0 - xi.gamma));
  return p;
}

}  // namespace cellph
