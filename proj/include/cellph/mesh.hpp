#pragma once

#include <cstddef>
#include <vector>

#include "cellph/config.hpp"

namespace cellph {

/// 1-D radial nodes for the two domains. The membrane r = R is a node of
/// both; interior and exterior values there are distinct unknowns.
struct RadialMesh {
  std::vector<double> interior;  // 0 = r_0 < ... < r_{n-1} = R
  std::vector<double> exterior;  // R = r_0 < ... < r_{n-1} = R_inf

  /// Geometric grading toward r = R (consecutive element ratio per domain).
  static RadialMesh graded(const Geometry& geom, const MeshSpec& spec);

  /// Exterior nodes with R <= r <= R + delta (the node at R included).
  std::size_t exterior_nodes_in_layer(double delta) const;

  /// Throws ConfigError unless nodes are strictly increasing, end on R and
  /// R_inf, and at least two exterior nodes resolve the CA layer.
  void validate(const Geometry& geom, double delta) const;
};

}  // namespace cellph
