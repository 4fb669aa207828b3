#pragma once

// The preprocessed dictionary: atoms and labels, their k-medoids partition,
// and per subdictionary the NMF code book and DCE statistics. Built once,
// saved as a directory, loaded for estimation.
//
// On disk:
//   manifest.txt        versioned text, see save_bundle()
//   atoms.f64           m x p, column-major little-endian f64
//   labels.f64          3 x p
//   sub<i>_W.f64        m x k_i
//   sub<i>_H.f64        k_i x p_i
//   sub<i>_mu.f64       m
//   sub<i>_C.f64        m x m (full) or m (diagonal)

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cellph/cluster.hpp"
#include "cellph/dce.hpp"
#include "cellph/dictionary.hpp"
#include "cellph/nmf.hpp"

namespace cellph {

struct Subdictionary {
  std::vector<std::size_t> members;  // ascending atom indices
  std::size_t medoid = 0;
  int rank = 0;
  Matrix W;  // m x rank
  Matrix H;  // rank x members
  DceStats dce;
  Whitener whitener;  // derived from dce, not stored

  /// Recomputes the whitener. Throws ConfigError on a non-SPD covariance.
  void prepare();
  /// The atom columns of the members.
  Matrix block(const Matrix& atoms) const;
};

struct BundleSeeds {
  std::uint64_t cluster = 1;
  std::uint64_t nmf = 1;
  std::uint64_t dce = 1;
};

struct Bundle {
  static constexpr int kVersion = 1;

  std::string config_hash;
  BundleSeeds seeds;
  Dictionary dict;
  std::vector<Subdictionary> subs;
  double clustering_cost = 0.0;
  double rank_threshold = 1e-3;
  int dce_samples = 0;

  int k() const { return static_cast<int>(subs.size()); }
  /// Cluster id per atom.
  std::vector<int> assignment() const;
};

struct BuildOptions {
  GridSpec grid;
  int k = 5;
  /// Fixed NMF rank; 0 selects per subdictionary with rank_threshold.
  int rank = 3;
  double rank_threshold = 1e-3;
  BundleSeeds seeds;
  KMedoidsOptions kmedoids;
  NmfOptions nmf;
  DceOptions dce;
  GenerateOptions generate;
  /// Progress messages, one line each.
  std::function<void(const std::string&)> log;
};

/// generate -> cluster -> compress -> estimate_dce. Seeds in `options.seeds`
/// override those inside the nested option structs.
Bundle build_bundle(const ForwardConfig& config, const BuildOptions& options);

/// Clusters, compresses and samples DCE for an existing dictionary.
Bundle build_bundle(const ForwardConfig& config, Dictionary dict, const BuildOptions& options);

/// Writes the directory (created if needed). Matrix files are written first
/// and the manifest last, so a directory without a manifest is incomplete.
void save_bundle(const std::filesystem::path& dir, const Bundle& bundle);

/// Reads and verifies every file against the sizes and FNV-1a hashes in the
/// manifest, and the manifest against its own trailing hash. When `config`
/// is given its hash must match the recorded one. Throws BundleError.
Bundle load_bundle(const std::filesystem::path& dir, const ForwardConfig* config = nullptr);

/// load_bundle() plus structural checks (partition, non-negativity, SPD).
/// Returns a one-line summary. Throws BundleError.
std::string validate_bundle(const std::filesystem::path& dir, const ForwardConfig* config = nullptr);

/// True when every stored array of a and b is bitwise equal.
bool bitwise_equal(const Bundle& a, const Bundle& b);

}  // namespace cellph
