#include "cellph/dictionary.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include <omp.h>

#include "cellph/errors.hpp"
#include "cellph/measure.hpp"

static_assert(std::endian::native == std::endian::little, "raw f64 files are little-endian");

namespace cellph {

void GridSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (n[a] < 2) throw ConfigError("grid: need at least 2 nodes per axis");
    if (!(lo[a] >= 0.0 && lo[a] < hi[a] && hi[a] <= 1.0)) {
      throw ConfigError("grid: need 0 <= lo < hi <= 1 on every axis");
    }
  }
}

std::size_t GridSpec::size() const {
  return static_cast<std::size_t>(n[0]) * static_cast<std::size_t>(n[1]) *
         static_cast<std::size_t>(n[2]);
}

double GridSpec::spacing(int axis) const { return (hi[axis] - lo[axis]) / (n[axis] - 1); }

std::array<int, 3> GridSpec::index(std::size_t j) const {
  std::array<int, 3> idx{};
  idx[2] = static_cast<int>(j % static_cast<std::size_t>(n[2]));
  j /= static_cast<std::size_t>(n[2]);
  idx[1] = static_cast<int>(j % static_cast<std::size_t>(n[1]));
  idx[0] = static_cast<int>(j / static_cast<std::size_t>(n[1]));
  return idx;
}

std::size_t GridSpec::flat(const std::array<int, 3>& idx) const {
  return (static_cast<std::size_t>(idx[0]) * static_cast<std::size_t>(n[1]) +
          static_cast<std::size_t>(idx[1])) *
             static_cast<std::size_t>(n[2]) +
         static_cast<std::size_t>(idx[2]);
}

ParamVector GridSpec::label(std::size_t j) const {
  const auto idx = index(j);
  ParamVector xi;
  for (int a = 0; a < 3; ++a) {
    // The last node is hi exactly rather than lo + (n-1) * spacing.
    const double v = idx[a] == n[a] - 1 ? hi[a] : lo[a] + idx[a] * spacing(a);
    set_component(xi, a, v);
  }
  return xi;
}

ParamVector GridSpec::clamp(const ParamVector& xi) const {
  ParamVector out = xi;
  for (int a = 0; a < 3; ++a) set_component(out, a, std::clamp(component(xi, a), lo[a], hi[a]));
  return out;
}

GridSpec parse_grid_counts(const std::string& text) {
  GridSpec g;
  std::vector<int> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("grid: cannot parse '" + text + "'");
    }
  }
  if (v.size() == 1) v = {v[0], v[0], v[0]};
  if (v.size() != 3) throw ConfigError("grid: expected n or n1,n2,n3");
  g.n = {v[0], v[1], v[2]};
  g.validate();
  return g;
}

double component(const ParamVector& xi, int axis) {
  return axis == 0 ? xi.lambda : axis == 1 ? xi.A : xi.gamma;
}

void set_component(ParamVector& xi, int axis, double v) {
  (axis == 0 ? xi.lambda : axis == 1 ? xi.A : xi.gamma) = v;
}

void write_f64(const std::filesystem::path& path, const double* data, std::size_t count) {
  // Write then rename, so a crash never leaves a truncated file under the
  // final name.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<double> read_f64(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  const auto bytes = static_cast<std::size_t>(f.tellg());
  if (bytes % sizeof(double) != 0) throw std::runtime_error("truncated f64 file " + path.string());
  std::vector<double> out(bytes / sizeof(double));
  f.seekg(0);
  f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  if (!f) throw std::runtime_error("read failed: " + path.string());
  return out;
}

std::uint64_t hash_f64(const double* data, std::size_t count) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(data), count * sizeof(double)));
}

std::filesystem::path column_cache_dir(const std::filesystem::path& root,
                                       const ForwardConfig& config, const GridSpec& grid) {
  std::ostringstream key;
  key.precision(17);
  for (int a = 0; a < 3; ++a) key << grid.lo[a] << ',' << grid.hi[a] << ',' << grid.n[a] << ';';
  return root / (config_hash(config) + "_" + hex64(fnv1a64(key.str())));
}

namespace {

std::vector<double> simulate_column(const ForwardConfig& config, const ParamVector& xi) {
  return synthesize_datum(config, xi).values;
}

Dictionary empty_dictionary(const GridSpec& grid, const ForwardConfig& config) {
  grid.validate();
  config.validate();
  Dictionary d;
  d.grid = grid;
  d.atoms.resize(static_cast<Eigen::Index>(config.experiment.frame_count()),
                 static_cast<Eigen::Index>(grid.size()));
  d.labels.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) d.labels[j] = grid.label(j);
  return d;
}

[[noreturn]] void report_failures(std::vector<ColumnFailure> failures, std::size_t total) {
  std::sort(failures.begin(), failures.end(),
            [](const ColumnFailure& a, const ColumnFailure& b) { return a.column < b.column; });
  std::ostringstream msg;
  msg << failures.size() << " of " << total << " dictionary columns failed";
  for (std::size_t i = 0; i < failures.size() && i < 5; ++i) {
    msg << "\n  column " << failures[i].column << ": " << failures[i].message;
  }
  throw IntegrationError(msg.str());
}

}  // namespace

Dictionary generate(const GridSpec& grid, const ForwardConfig& config,
                    const GenerateOptions& options) {
  Dictionary d = empty_dictionary(grid, config);
  const std::size_t m = static_cast<std::size_t>(d.atoms.rows());
  const std::size_t p = grid.size();

  std::filesystem::path cache;
  if (!options.cache_dir.empty()) {
    cache = column_cache_dir(options.cache_dir, config, grid);
    std::filesystem::create_directories(cache);
  }

  std::vector<ColumnFailure> failures;
  std::mutex failure_mutex;
  std::atomic<std::size_t> done{0};
  const int threads = options.workers > 0 ? options.workers : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::size_t j = 0; j < p; ++j) {
    double* col = d.atoms.col(static_cast<Eigen::Index>(j)).data();
    const std::filesystem::path file = cache.empty() ? cache : cache / ("atom_" + std::to_string(j) + ".f64");
    bool have = false;
    if (!file.empty() && std::filesystem::exists(file)) {
      try {
        const auto v = read_f64(file);
        if (v.size() == m) {
          std::memcpy(col, v.data(), m * sizeof(double));
          have = true;
        }
      } catch (const std::exception&) {
        have = false;  // unreadable entries are regenerated
      }
    }
    if (!have) {
      try {
        const auto v = simulate_column(config, d.labels[j]);
        std::memcpy(col, v.data(), m * sizeof(double));
        if (!file.empty()) write_f64(file, v.data(), m);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        failures.push_back({j, e.what()});
      }
    }
    const std::size_t n_done = ++done;
    if (options.progress) options.progress(n_done, p);
  }
  if (!failures.empty()) report_failures(std::move(failures), p);
  return d;
}

Dictionary generate_serial(const GridSpec& grid, const ForwardConfig& config) {
  Dictionary d = empty_dictionary(grid, config);
  std::vector<ColumnFailure> failures;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    try {
      const auto v = simulate_column(config, d.labels[j]);
      d.atoms.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Vector>(v.data(), d.atoms.rows());
    } catch (const std::exception& e) {
      failures.push_back({j, e.what()});
    }
  }
  if (!failures.empty()) report_failures(std::move(failures), grid.size());
  return d;
}

}  // namespace cellph
