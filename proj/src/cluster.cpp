#include "cellph/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <omp.h>

namespace cellph {

namespace {

double distance(const Matrix& atoms, std::size_t a, std::size_t b) {
  return (atoms.col(static_cast<Eigen::Index>(a)) - atoms.col(static_cast<Eigen::Index>(b))).norm();
}

int thread_count(const KMedoidsOptions& o) {
  return o.serial ? 1 : (o.workers > 0 ? o.workers : omp_get_max_threads());
}

// Sum of distances from candidate c to every member; fixed summation order.
double summed_distance(const Matrix& atoms, const std::vector<std::size_t>& members, std::size_t c) {
  double acc = 0.0;
  for (std::size_t j : members) acc += distance(atoms, c, j);
  return acc;
}

std::size_t best_medoid(const Matrix& atoms, const std::vector<std::size_t>& members,
                        std::size_t current, const KMedoidsOptions& options) {
  std::vector<double> cost(members.size());
  const int threads = thread_count(options);
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads) if (threads > 1)
  for (std::size_t i = 0; i < members.size(); ++i) cost[i] = summed_distance(atoms, members, members[i]);
  // Keep the current medoid unless another member is strictly better, so the
  // iteration cannot cycle between equal-cost medoids.
  std::size_t best = current;
  double best_cost = summed_distance(atoms, members, current);
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (cost[i] < best_cost) {
      best_cost = cost[i];
      best = members[i];
    }
  }
  return best;
}

std::vector<std::size_t> kmedoids_pp(const Matrix& atoms, int k, std::mt19937_64& rng) {
  const std::size_t p = static_cast<std::size_t>(atoms.cols());
  std::vector<std::size_t> medoids;
  std::vector<bool> chosen(p, false);
  std::uniform_int_distribution<std::size_t> pick(0, p - 1);
  medoids.push_back(pick(rng));
  chosen[medoids.back()] = true;
  std::vector<double> d2(p, std::numeric_limits<double>::infinity());
  while (static_cast<int>(medoids.size()) < k) {
    double total = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double d = distance(atoms, j, medoids.back());
      d2[j] = std::min(d2[j], d * d);
      if (!chosen[j]) total += d2[j];
    }
    std::size_t next = p;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng), acc = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        if (chosen[j]) continue;
        acc += d2[j];
        next = j;
        if (acc >= target && d2[j] > 0.0) break;
      }
    } else {
      // All remaining atoms coincide with a medoid; any unchosen one will do.
      std::vector<std::size_t> free;
      for (std::size_t j = 0; j < p; ++j) if (!chosen[j]) free.push_back(j);
      std::uniform_int_distribution<std::size_t> f(0, free.size() - 1);
      next = free[f(rng)];
    }
    medoids.push_back(next);
    chosen[next] = true;
  }
  return medoids;
}

void canonicalize(Partition& part) {
  std::vector<int> order(part.medoids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return part.medoids[a] < part.medoids[b]; });
  std::vector<int> relabel(order.size());
  std::vector<std::size_t> medoids(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    relabel[order[i]] = static_cast<int>(i);
    medoids[i] = part.medoids[order[i]];
  }
  part.medoids = std::move(medoids);
  for (int& a : part.assignment) a = relabel[a];
}

double total(const std::vector<double>& d) {
  double acc = 0.0;
  for (double v : d) acc += v;
  return acc;
}

}  // namespace

std::vector<std::size_t> Partition::members(int cluster) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < assignment.size(); ++j) {
    if (assignment[j] == cluster) out.push_back(j);
  }
  return out;
}

std::vector<int> assign_to_medoids(const Matrix& atoms, const std::vector<std::size_t>& medoids,
                                   std::vector<double>* dist, const KMedoidsOptions& options) {
  const std::size_t p = static_cast<std::size_t>(atoms.cols());
  std::vector<int> a(p);
  if (dist) dist->assign(p, 0.0);
  const int threads = thread_count(options);
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (std::size_t j = 0; j < p; ++j) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < medoids.size(); ++c) {
      const double d = distance(atoms, j, medoids[c]);
      if (d < bd) {
        bd = d;
        best = static_cast<int>(c);
      }
    }
    a[j] = best;
    if (dist) (*dist)[j] = bd;
  }
  return a;
}

Partition kmedoids_from(const Matrix& atoms, std::vector<std::size_t> medoids,
                        const KMedoidsOptions& options) {
  const std::size_t p = static_cast<std::size_t>(atoms.cols());
  if (medoids.empty() || medoids.size() > p) throw std::invalid_argument("kmedoids: bad medoid count");
  {
    auto sorted = medoids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() || sorted.back() >= p) {
      throw std::invalid_argument("kmedoids: medoids must be distinct atom indices");
    }
  }
  Partition part;
  part.medoids = std::move(medoids);
  const int k = part.k();
  std::vector<double> dist;
  part.assignment = assign_to_medoids(atoms, part.medoids, &dist, options);
  part.cost = total(dist);
  part.cost_trace.push_back(part.cost);

  for (part.sweeps = 0; part.sweeps < options.max_sweeps;) {
    ++part.sweeps;
    bool changed = false;
    for (int c = 0; c < k; ++c) {
      auto members = part.members(c);
      if (members.empty()) {
        // Re-seed with the atom farthest from its medoid.
        std::size_t far = 0;
        for (std::size_t j = 1; j < p; ++j) if (dist[j] > dist[far]) far = j;
        if (dist[far] == 0.0) continue;  // every atom sits on a medoid already
        part.medoids[static_cast<std::size_t>(c)] = far;
        ++part.reseeded;
        changed = true;
        part.assignment = assign_to_medoids(atoms, part.medoids, &dist, options);
        continue;
      }
      const std::size_t nm = best_medoid(atoms, members, part.medoids[static_cast<std::size_t>(c)], options);
      if (nm != part.medoids[static_cast<std::size_t>(c)]) {
        part.medoids[static_cast<std::size_t>(c)] = nm;
        changed = true;
      }
    }
    // Cost with the old assignment and the new medoids.
    double updated = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      updated += distance(atoms, j, part.medoids[static_cast<std::size_t>(part.assignment[j])]);
    }
    part.cost_trace.push_back(updated);
    part.assignment = assign_to_medoids(atoms, part.medoids, &dist, options);
    part.cost = total(dist);
    part.cost_trace.push_back(part.cost);
    if (!changed) break;
  }
  canonicalize(part);
  return part;
}

Partition cluster(const Matrix& atoms, int k, const KMedoidsOptions& options) {
  if (k < 1 || k > atoms.cols()) throw std::invalid_argument("cluster: need 1 <= k <= atoms");
  if (options.restarts < 1) throw std::invalid_argument("cluster: restarts must be >= 1");
  Partition best;
  bool have = false;
  for (int r = 0; r < options.restarts; ++r) {
    std::mt19937_64 rng(options.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(r + 1));
    Partition part = kmedoids_from(atoms, kmedoids_pp(atoms, k, rng), options);
    if (!have || part.cost < best.cost) {
      best = std::move(part);
      have = true;
    }
  }
  return best;
}

std::vector<ElbowRow> elbow_scan(const Matrix& atoms, std::vector<int> ks,
                                 const KMedoidsOptions& options) {
  if (ks.empty()) throw std::invalid_argument("elbow_scan: empty k range");
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::vector<ElbowRow> rows;
  Partition prev;
  bool have_prev = false;
  for (int k : ks) {
    Partition best = cluster(atoms, k, options);
    if (have_prev) {
      // Grow the previous solution one medoid at a time, farthest atom first.
      std::vector<std::size_t> med = prev.medoids;
      while (static_cast<int>(med.size()) < k) {
        std::vector<double> d;
        assign_to_medoids(atoms, med, &d, options);
        std::size_t far = 0;
        for (std::size_t j = 1; j < d.size(); ++j) if (d[j] > d[far]) far = j;
        if (d[far] == 0.0) {
          for (far = 0; std::find(med.begin(), med.end(), far) != med.end(); ++far) {}
        }
        med.push_back(far);
      }
      Partition warm = kmedoids_from(atoms, med, options);
      if (warm.cost < best.cost) best = std::move(warm);
    }
    rows.push_back({k, best.cost});
    prev = std::move(best);
    have_prev = true;
  }
  return rows;
}

}  // namespace cellph
