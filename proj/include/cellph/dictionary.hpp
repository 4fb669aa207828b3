#pragma once

// Parameter grid and the labeled atom dictionary: one quantized,
// background-removed pH series per grid node.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cellph/config.hpp"
#include "cellph/params.hpp"
#include "cellph/sparse.hpp"

namespace cellph {

/// Uniform tensor grid over a box in xi space. Node order is lexicographic in
/// (i_lambda, i_A, i_gamma) with i_gamma fastest.
struct GridSpec {
  std::array<double, 3> lo{0.6, 0.6, 0.0};
  std::array<double, 3> hi{1.0, 1.0, 1.0};
  std::array<int, 3> n{12, 12, 12};

  /// Throws ConfigError: n >= 2, 0 <= lo < hi <= 1.
  void validate() const;
  std::size_t size() const;
  double spacing(int axis) const;
  std::array<int, 3> index(std::size_t j) const;
  std::size_t flat(const std::array<int, 3>& idx) const;
  ParamVector label(std::size_t j) const;
  /// Clamps each component into the box.
  ParamVector clamp(const ParamVector& xi) const;

  bool operator==(const GridSpec&) const = default;
};

/// Parses "n" or "n1,n2,n3" (counts only; the box stays default).
GridSpec parse_grid_counts(const std::string& text);

double component(const ParamVector& xi, int axis);
void set_component(ParamVector& xi, int axis, double v);

struct Dictionary {
  GridSpec grid;
  Matrix atoms;  // m x p, column j is the datum at grid.label(j)
  std::vector<ParamVector> labels;
};

struct GenerateOptions {
  /// OpenMP threads; 0 uses the runtime default.
  int workers = 0;
  /// Per-column cache. Columns already present (and valid) are loaded
  /// instead of simulated. Empty disables caching.
  std::filesystem::path cache_dir;
  /// Called after each finished column from the thread that finished it.
  std::function<void(std::size_t done, std::size_t total)> progress;
};

struct ColumnFailure {
  std::size_t column;
  std::string message;
};

/// Simulates every grid node in parallel. Columns are independent and written
/// to fixed slots, so the result does not depend on the worker count.
/// Throws IntegrationError listing the failed columns if any fails.
Dictionary generate(const GridSpec& grid, const ForwardConfig& config,
                    const GenerateOptions& options = {});

/// Single-threaded reference for generate(), no cache.
Dictionary generate_serial(const GridSpec& grid, const ForwardConfig& config);

/// Cache directory for one (config, grid) pair under `root`.
std::filesystem::path column_cache_dir(const std::filesystem::path& root,
                                       const ForwardConfig& config, const GridSpec& grid);

/// Raw little-endian f64 column-major I/O shared by the cache and bundles.
void write_f64(const std::filesystem::path& path, const double* data, std::size_t count);
std::vector<double> read_f64(const std::filesystem::path& path);
std::uint64_t hash_f64(const double* data, std::size_t count);

}  // namespace cellph
