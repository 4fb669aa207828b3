#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cellph/measure.hpp"

using namespace cellph;

namespace {

std::vector<double> flat(double v, std::size_t n = 1001) { return std::vector<double>(n, v); }

}  // namespace

TEST(Quantize, RoundsToDevicePrecision) {
  EXPECT_NEAR(quantize(7.513, 0.02), 7.52, 1e-12);
  EXPECT_NEAR(quantize(7.509, 0.02), 7.50, 1e-12);
  EXPECT_NEAR(quantize(7.5, 0.02), 7.5, 1e-12);
}

TEST(Quantize, DecimalTiesRoundAwayFromZero) {
  EXPECT_NEAR(quantize(7.51, 0.02), 7.52, 1e-12);
  EXPECT_NEAR(quantize(7.53, 0.02), 7.54, 1e-12);
  EXPECT_NEAR(quantize(-0.01, 0.02), -0.02, 1e-12);
  EXPECT_EQ(quantize_index(7.51, 0.02), 376);
}

TEST(Quantize, IsIdempotentAndWithinHalfStep) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(6.0, 9.0);
  for (int i = 0; i < 10000; ++i) {
    const double y = U(rng);
    const double q = quantize(y, 0.02);
    ASSERT_LE(std::abs(q - y), 0.01 + 1e-9);
    ASSERT_EQ(quantize(q, 0.02), q);
  }
}

TEST(Datum, BackgroundRemovedInWholeQuanta) {
  const MeasureSpec m;
  const ExperimentSpec e;
  std::vector<double> ph = flat(7.5);
  ph[10] = 7.61;
  ph[11] = 7.5 + 1e-12;
  const PhTrace d = make_datum(ph, m, e);
  ASSERT_EQ(d.size(), 1001u);
  EXPECT_NEAR(d.values[10], 0.12, 1e-12);
  EXPECT_EQ(d.values[11], 0.0);
  for (double v : d.values) {
    const double k = v / m.precision;
    EXPECT_NEAR(k, std::round(k), 1e-9);
  }
}

TEST(Datum, SmallUndershootClampsToZero) {
  std::vector<double> ph = flat(7.5);
  ph[3] = 7.489;  // quantizes to 7.48, one quantum below
  const PhTrace d = make_datum(ph, {}, {});
  EXPECT_EQ(d.values[3], 0.0);
}

TEST(Datum, DeepUndershootIsAnError) {
  std::vector<double> ph = flat(7.5);
  ph[3] = 7.3;
  EXPECT_THROW(make_datum(ph, {}, {}), std::domain_error);
  MeasureSpec noisy;
  noisy.noise_sd = 0.01;
  EXPECT_EQ(make_datum(ph, noisy, {}).values[3], 0.0);
}

TEST(Datum, WrongLengthIsRejected) { EXPECT_THROW(make_datum(flat(7.5, 1000), {}, {}), std::invalid_argument); }

TEST(Datum, NoiseIsSeededAndOptional) {
  MeasureSpec m;
  const std::vector<double> ph = flat(7.6);
  EXPECT_EQ(add_noise(ph, m), ph);
  m.noise_sd = 0.01;
  m.noise_seed = 5;
  const auto a = add_noise(ph, m), b = add_noise(ph, m);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, ph);
  m.noise_seed = 6;
  EXPECT_NE(add_noise(ph, m), a);
}

TEST(DatumCsv, RoundTripIsExact) {
  PhTrace d;
  d.values = {0.0, 0.02, 0.1 + 0.2, 1.0 / 3.0};
  std::stringstream ss;
  write_datum_csv(ss, d);
  EXPECT_EQ(read_datum_csv(ss), d);
}

TEST(DatumCsv, SchemaViolationsAreRejected) {
  const char* bad[] = {
      "pH,p,dt,n\n7.5,0.02,0.5,1\nb\n0\n",        // header name
      "pH0,p,dt,n\n7.5,0.02,0.5,2\nb\n0\n",       // count mismatch
      "pH0,p,dt,n\n7.5,0.02,0.5,1\nb\n-0.02\n",   // negative value
      "pH0,p,dt,n\n7.5,0.02,0.5,1\nx\n0\n",       // column header
      "pH0,p,dt,n\n7.5,0,0.5,1\nb\n0\n",          // precision
      "pH0,p,dt,n\n7.5,0.02,0.5,1\nb\nabc\n",     // number
  };
  for (const char* text : bad) {
    std::stringstream ss(text);
    EXPECT_THROW(read_datum_csv(ss), std::runtime_error) << text;
  }
}

TEST(Datum, SynthesizedExperimentRisesAboveBackground) {
  const PhTrace d = synthesize_datum(ForwardConfig{}, {0.9, 0.8, 0.8});
  EXPECT_GT(*std::max_element(d.values.begin(), d.values.end()), 0.0);
  EXPECT_EQ(d.values.front(), 0.0);
}
