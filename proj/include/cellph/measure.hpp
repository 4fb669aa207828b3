#pragma once

// Turns a simulated compartment pH series into the measurement vector used by
// the estimator: quantized to the device precision, background removed.

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "cellph/config.hpp"
#include "cellph/params.hpp"

namespace cellph {

/// Quantized, background-removed pH series. Every value is >= 0.
struct PhTrace {
  std::vector<double> values;
  double pH0 = 7.5;
  double precision = 0.02;
  double dt = 0.5;

  std::size_t size() const { return values.size(); }
  bool operator==(const PhTrace&) const = default;
};

/// p * round(y / p), ties away from zero. A quotient within 1e-9 of a
/// half-integer counts as a tie, so decimal ties such as 7.51 / 0.02 round up
/// even though the binary quotient falls just short of 375.5.
double quantize(double y, double p);

/// Number of quanta, the integer k with quantize(y, p) = k p.
long quantize_index(double y, double p);

/// b_i = quantize(pH_i) - pH0. Values in [-p, 0) are quantization artifacts
/// and clamp to 0; anything lower throws std::domain_error unless noise is
/// enabled, in which case it clamps as well. Throws std::invalid_argument
/// when the series length differs from experiment.frame_count().
PhTrace make_datum(const std::vector<double>& ph, const MeasureSpec& measure,
                   const ExperimentSpec& experiment);

/// Adds N(0, noise_sd^2) to every sample, seeded by measure.noise_seed.
/// Identity when noise_sd = 0.
std::vector<double> add_noise(std::vector<double> ph, const MeasureSpec& measure);

/// Forward simulation at xi followed by optional noise and make_datum.
PhTrace synthesize_datum(const ForwardConfig& config, const ParamVector& xi);

// Datum CSV:
//   pH0,p,dt,n
//   <values>
//   b
//   b_0
//   ...
// Values are written with 17 significant digits, so reading back is exact.
void write_datum_csv(std::ostream& out, const PhTrace& datum);
void save_datum_csv(const std::filesystem::path& path, const PhTrace& datum);
/// Throws std::runtime_error on any schema violation.
PhTrace read_datum_csv(std::istream& in);
PhTrace load_datum_csv(const std::filesystem::path& path);

}  // namespace cellph
