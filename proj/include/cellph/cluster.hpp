#pragma once

// k-medoids clustering of dictionary atoms under the Euclidean distance.
// Alternating (Voronoi) iteration: assign every atom to its nearest medoid,
// then move each medoid to the member minimizing the summed distance to the
// other members. Both steps never increase the total cost.

#include <cstdint>
#include <vector>

#include "cellph/sparse.hpp"

namespace cellph {

struct KMedoidsOptions {
  int restarts = 8;
  int max_sweeps = 100;
  std::uint64_t seed = 1;
  /// OpenMP threads for the assignment and medoid kernels; 0 = runtime default.
  int workers = 0;
  /// Serial kernels; results are identical either way.
  bool serial = false;
};

struct Partition {
  std::vector<int> assignment;       // cluster id per atom
  std::vector<std::size_t> medoids;  // atom index per cluster, ascending
  double cost = 0.0;                 // sum of distances to the assigned medoid
  int sweeps = 0;
  std::vector<double> cost_trace;    // after every assignment and every update step
  int reseeded = 0;                  // empty clusters re-seeded

  int k() const { return static_cast<int>(medoids.size()); }
  std::vector<std::size_t> members(int cluster) const;
};

/// Nearest medoid for every column; ties go to the lower cluster index.
/// Writes distances when `distance` is non-null.
std::vector<int> assign_to_medoids(const Matrix& atoms, const std::vector<std::size_t>& medoids,
                                   std::vector<double>* distance, const KMedoidsOptions& options);

/// Best of `restarts` seeded k-medoids++ starts. Clusters are numbered by
/// ascending medoid index, so the result depends only on the data and seed.
/// Throws std::invalid_argument unless 1 <= k <= number of atoms.
Partition cluster(const Matrix& atoms, int k, const KMedoidsOptions& options = {});

/// Alternating iteration from the given medoids (distinct atom indices).
/// An empty cluster gets the atom farthest from its current medoid.
Partition kmedoids_from(const Matrix& atoms, std::vector<std::size_t> medoids,
                        const KMedoidsOptions& options = {});

struct ElbowRow {
  int k;
  double cost;
};

/// Best cost per k. Each k also tries a warm start from the previous k's
/// medoids plus the farthest atom, so the table is non-increasing in k.
std::vector<ElbowRow> elbow_scan(const Matrix& atoms, std::vector<int> ks,
                                 const KMedoidsOptions& options = {});

}  // namespace cellph
