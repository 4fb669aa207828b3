#include "cellph/mesh.hpp"

#include <cmath>

#include "cellph/errors.hpp"

namespace cellph {

namespace {

// n nodes on [a, b]; element k has length proportional to ratio^k.
std::vector<double> geometric_nodes(double a, double b, int n, double ratio) {
  const int elems = n - 1;
  std::vector<double> len(elems);
  double total = 0.0;
  for (int k = 0; k < elems; ++k) {
    len[k] = std::pow(ratio, k);
    total += len[k];
  }
  std::vector<double> nodes(n);
  nodes[0] = a;
  double acc = 0.0;
  for (int k = 0; k < elems; ++k) {
    acc += len[k];
    nodes[k + 1] = a + (b - a) * (acc / total);
  }
  nodes[n - 1] = b;
  return nodes;
}

}  // namespace

RadialMesh RadialMesh::graded(const Geometry& geom, const MeshSpec& spec) {
  geom.validate();
  if (spec.interior_nodes < 3 || spec.exterior_nodes < 3) {
    throw ConfigError("mesh: need at least 3 nodes per domain");
  }
  RadialMesh m;
  // Interior: smallest element at r = R, so grow from R inward and mirror.
  const auto mirrored =
      geometric_nodes(0.0, geom.R, spec.interior_nodes, spec.interior_grading);
  m.interior.resize(mirrored.size());
  for (std::size_t i = 0; i < mirrored.size(); ++i) {
    m.interior[i] = geom.R - mirrored[mirrored.size() - 1 - i];
  }
  m.interior.front() = 0.0;
  m.interior.back() = geom.R;
  m.exterior = geometric_nodes(geom.R, geom.R_inf, spec.exterior_nodes, spec.exterior_grading);
  return m;
}

std::size_t RadialMesh::exterior_nodes_in_layer(double delta) const {
  if (exterior.empty()) return 0;
  const double R = exterior.front();
  std::size_t count = 0;
  for (double r : exterior) {
    if (r - R <= delta) ++count;
  }
  return count;
}

void RadialMesh::validate(const Geometry& geom, double delta) const {
  auto increasing = [](const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (!(v[i] > v[i - 1])) return false;
    }
    return v.size() >= 2;
  };
  if (!increasing(interior) || !increasing(exterior)) {
    throw ConfigError("mesh: nodes must be strictly increasing");
  }
  if (interior.front() != 0.0 || interior.back() != geom.R || exterior.front() != geom.R ||
      exterior.back() != geom.R_inf) {
    throw ConfigError("mesh: R and R_inf must be nodes");
  }
  if (exterior_nodes_in_layer(delta) < 2) {
    throw ConfigError("mesh does not resolve the CA layer: fewer than 2 exterior nodes in [R, R+delta]");
  }
}

}  // namespace cellph
