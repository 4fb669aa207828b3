#include "cellph/measure.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "cellph/forward.hpp"

namespace cellph {

namespace {

constexpr double kTieSlack = 1e-9;

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const char* what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  while (used < s.size() && (s[used] == ' ' || s[used] == '\r')) ++used;
  if (used == 0 || used != s.size()) {
    throw std::runtime_error(std::string("datum csv: bad ") + what + " '" + s + "'");
  }
  return v;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

}  // namespace

long quantize_index(double y, double p) {
  if (!(p > 0.0)) throw std::invalid_argument("quantize: precision must be > 0");
  const double a = std::abs(y / p);
  double k = std::floor(a);
  if (a - k >= 0.5 - kTieSlack) k += 1.0;
  return y < 0.0 ? -static_cast<long>(k) : static_cast<long>(k);
}

double quantize(double y, double p) { return static_cast<double>(quantize_index(y, p)) * p; }

PhTrace make_datum(const std::vector<double>& ph, const MeasureSpec& measure,
                   const ExperimentSpec& experiment) {
  if (ph.size() != experiment.frame_count()) {
    throw std::invalid_argument("make_datum: expected " + std::to_string(experiment.frame_count()) +
                                " samples, got " + std::to_string(ph.size()));
  }
  const double p = measure.precision;
  PhTrace out;
  out.pH0 = measure.pH0;
  out.precision = p;
  out.dt = experiment.dt_out;
  out.values.resize(ph.size());

  // With pH0 on the lattice the shift is exact in quanta.
  const long k0 = quantize_index(measure.pH0, p);
  const bool on_lattice = std::abs(measure.pH0 / p - static_cast<double>(k0)) < kTieSlack;
  for (std::size_t i = 0; i < ph.size(); ++i) {
    if (!std::isfinite(ph[i])) throw std::domain_error("make_datum: non-finite pH");
    double b = on_lattice ? static_cast<double>(quantize_index(ph[i], p) - k0) * p
                          : quantize(ph[i], p) - measure.pH0;
    if (b < 0.0) {
      if (b < -p * (1.0 + kTieSlack) && measure.noise_sd == 0.0) {
        throw std::domain_error("make_datum: pH below background at sample " + std::to_string(i));
      }
      b = 0.0;
    }
    out.values[i] = b;
  }
  return out;
}

std::vector<double> add_noise(std::vector<double> ph, const MeasureSpec& measure) {
  if (measure.noise_sd == 0.0) return ph;
  std::mt19937_64 rng(measure.noise_seed);
  std::normal_distribution<double> normal(0.0, measure.noise_sd);
  for (double& v : ph) v += normal(rng);
  return ph;
}

PhTrace synthesize_datum(const ForwardConfig& config, const ParamVector& xi) {
  return make_datum(add_noise(simulate_ph(config, xi), config.measure), config.measure,
                    config.experiment);
}

void write_datum_csv(std::ostream& out, const PhTrace& datum) {
  out << "pH0,p,dt,n\n"
      << fmt17(datum.pH0) << ',' << fmt17(datum.precision) << ',' << fmt17(datum.dt) << ','
      << datum.values.size() << "\nb\n";
  for (double v : datum.values) out << fmt17(v) << '\n';
}

void save_datum_csv(const std::filesystem::path& path, const PhTrace& datum) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  write_datum_csv(f, datum);
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

PhTrace read_datum_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip(line) != "pH0,p,dt,n") {
    throw std::runtime_error("datum csv: expected header 'pH0,p,dt,n'");
  }
  if (!std::getline(in, line)) throw std::runtime_error("datum csv: missing header values");
  const auto fields = split_commas(strip(line));
  if (fields.size() != 4) throw std::runtime_error("datum csv: header row needs 4 fields");
  PhTrace d;
  d.pH0 = parse_double(fields[0], "pH0");
  d.precision = parse_double(fields[1], "p");
  d.dt = parse_double(fields[2], "dt");
  const double n = parse_double(fields[3], "n");
  if (!(n >= 1 && n == std::floor(n))) throw std::runtime_error("datum csv: bad sample count");
  if (!(d.precision > 0 && d.dt > 0)) throw std::runtime_error("datum csv: p and dt must be > 0");
  if (!std::getline(in, line) || strip(line) != "b") {
    throw std::runtime_error("datum csv: expected column header 'b'");
  }
  d.values.reserve(static_cast<std::size_t>(n));
  while (std::getline(in, line)) {
    line = strip(line);
    if (line.empty()) continue;
    const double v = parse_double(line, "value");
    if (!(v >= 0.0)) throw std::runtime_error("datum csv: values must be >= 0");
    d.values.push_back(v);
  }
  if (d.values.size() != static_cast<std::size_t>(n)) {
    throw std::runtime_error("datum csv: header says " + fields[3] + " samples, found " +
                             std::to_string(d.values.size()));
  }
  return d;
}

PhTrace load_datum_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  return read_datum_csv(f);
}

}  // namespace cellph
