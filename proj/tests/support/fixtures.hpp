#pragma once

// Deterministic problem generators shared by unit and acceptance tests.

#include <random>

#include <Eigen/Dense>

#include "cellph/bundle.hpp"
#include "cellph/chem.hpp"
#include "cellph/config.hpp"
#include "cellph/dictionary.hpp"

namespace fixture {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Non-negative factor with ~40% zeros and an identity block in its first
// `rank` rows, so every column owns an anchor row.
inline MatrixXd anchored_factor(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index rank) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  MatrixXd F(rows, rank);
  for (Eigen::Index j = 0; j < rank; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) F(i, j) = U(rng) < 0.4 ? 0.0 : 0.1 + U(rng);
  }
  F.topRows(rank) = MatrixXd::Identity(rank, rank);
  return F;
}

// D = W H with both factors anchored: a separable instance whose
// non-negative factorization is unique up to scaling and permutation.
inline MatrixXd separable_product(std::mt19937_64& rng, Eigen::Index m, Eigen::Index n, Eigen::Index rank) {
  const MatrixXd W = anchored_factor(rng, m, rank);
  const MatrixXd Ht = anchored_factor(rng, n, rank);
  return W * Ht.transpose();
}

// Sparse non-negative x* with `k` entries in [1, 2] and b = A x* + noise.
struct SparseProblem {
  MatrixXd A;
  VectorXd x_true;
  VectorXd b;
};

inline SparseProblem sparse_problem(std::mt19937_64& rng, Eigen::Index m, Eigen::Index n, int k,
                                    double noise) {
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(1.0, 2.0);
  SparseProblem p;
  p.A.resize(m, n);
  for (Eigen::Index j = 0; j < n; ++j) for (Eigen::Index i = 0; i < m; ++i) p.A(i, j) = N(rng);
  p.x_true = VectorXd::Zero(n);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  for (int c = 0; c < k;) {
    const Eigen::Index j = pick(rng);
    if (p.x_true[j] == 0.0) {
      p.x_true[j] = U(rng);
      ++c;
    }
  }
  p.b = p.A * p.x_true;
  for (Eigen::Index i = 0; i < m; ++i) p.b[i] += noise * N(rng);
  return p;
}

// Coarse mesh and loose tolerances: qualitatively faithful traces at a
// fraction of the cost, for tests that exercise plumbing rather than physics.
inline cellph::ForwardConfig fast_config() {
  cellph::ForwardConfig c;
  c.mesh.interior_nodes = 24;
  c.mesh.exterior_nodes = 36;
  c.mesh.interior_grading = 1.12;
  c.mesh.exterior_grading = 1.08;
  c.integrator.rtol = 1e-4;
  c.experiment.t_end = 100.0;
  c.experiment.dt_out = 1.0;
  return c;
}

// Both domains at their own chemical equilibrium, CO2 equal across the
// membrane, exterior pH exactly 7.5.
inline cellph::ForwardConfig stationary_config() {
  using namespace cellph;
  ForwardConfig c;
  const RateTable& t = c.rates;
  SpeciesState ext = c.initial.exterior;
  ext[kH] = mM_from_ph(7.5);
  ext = stationary_state(ext, t.side(Side::kExterior));
  SpeciesState in = c.initial.interior;
  in[kHCO3] = ext[kHCO3];
  in[kH] = ext[kH];
  in = stationary_state(in, t.side(Side::kInterior));
  c.initial.exterior = ext;
  c.initial.interior = in;
  return c;
}

// 4 x 4 x 4 atoms on the fast configuration, three subdictionaries of rank 2.
inline cellph::BuildOptions small_build_options() {
  cellph::BuildOptions o;
  o.grid.n = {4, 4, 4};
  o.k = 3;
  o.rank = 2;
  o.dce.samples = 24;
  o.kmedoids.restarts = 4;
  o.nmf.max_sweeps = 60;
  return o;
}

// Built once per test binary.
inline const cellph::Bundle& small_bundle() {
  static const cellph::Bundle b = cellph::build_bundle(fast_config(), small_build_options());
  return b;
}

}  // namespace fixture
