#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "vigil/errors.hpp"
#include "vigil/rng.hpp"
#include "vigil/spectral.hpp"

using namespace vigil;

namespace {

Eigen::VectorXd sine(double f, double fs, std::size_t n, double amp = 1.0, double phase = 0.0) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x(i) = amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs + phase);
  }
  return x;
}

Eigen::VectorXd white(std::uint64_t seed, std::size_t n, double sigma = 1.0) {
  Pcg32 rng(seed);
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = sigma * rng.normal();
  return x;
}

}  // namespace

TEST(Welch, GridForDefaultEpoch) {
  const auto psd = welch_psd(white(1, 5000), 500.0);
  EXPECT_EQ(psd.freqs.size(), 501);
  EXPECT_DOUBLE_EQ(psd.df, 0.5);
  EXPECT_DOUBLE_EQ(psd.freqs(0), 0.0);
  EXPECT_DOUBLE_EQ(psd.freqs(500), 250.0);
  EXPECT_TRUE((psd.density.array() >= 0.0).all());
}

TEST(Welch, MatchesDirectDft) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Eigen::VectorXd x = white(seed, 640, 3.0) + sine(13.0, 128.0, 640, 2.0);
    const auto psd = welch_psd(x, 128.0, {64, 0.5, Taper::hann});
    const auto ref = oracle::welch_dft(x, 128.0, 64, 32);
    ASSERT_EQ(psd.density.size(), static_cast<Eigen::Index>(ref.size()));
    for (std::size_t k = 0; k < ref.size(); ++k) {
      EXPECT_NEAR(psd.density(static_cast<Eigen::Index>(k)), ref[k], 1e-10 * (1.0 + ref[k]));
    }
  }
}

TEST(Welch, MatchesDirectDftAtDefaultSegment) {
  const auto x = white(11, 2000, 5.0);
  const auto psd = welch_psd(x, 500.0);
  const auto ref = oracle::welch_dft(x, 500.0, 1000, 500);
  for (std::size_t k = 0; k < ref.size(); ++k) {
    EXPECT_NEAR(psd.density(static_cast<Eigen::Index>(k)), ref[k], 1e-9 * (1.0 + ref[k]));
  }
}

TEST(Welch, ParsevalOnWhiteNoise) {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto x = white(seed, 5000);
    const auto psd = welch_psd(x, 500.0);
    const double var = (x.array() - x.mean()).square().mean();
    EXPECT_LT(std::abs(psd.density.sum() * psd.df - var) / var, 0.02);
  }
}

TEST(Welch, ConstantSignalHasNoPower) {
  const auto psd = welch_psd(Eigen::VectorXd::Constant(5000, 42.0), 500.0);
  EXPECT_EQ(psd.density.maxCoeff(), 0.0);
  EXPECT_EQ(relative_power(psd, bands::delta), 0.0);
  EXPECT_EQ(spectral_entropy(psd), 0.0);
  EXPECT_TRUE(peak_frequency(psd, bands::alpha).degenerate);
  EXPECT_DOUBLE_EQ(peak_frequency(psd, bands::alpha).hz, 8.0);
}

TEST(Welch, RejectsBadConfigs) {
  const auto x = white(1, 500);
  EXPECT_THROW(welch_psd(x, 500.0), ConfigError);  // segment longer than signal
  EXPECT_THROW(welch_psd(x, 0.0, {100, 0.5, Taper::hann}), ConfigError);
  EXPECT_THROW(welch_psd(x, 500.0, {100, 1.0, Taper::hann}), ConfigError);
  EXPECT_THROW(taper_from_string("kaiser"), ConfigError);
}

TEST(Welch, AmplitudeScalingIsQuadratic) {
  const auto x = white(3, 5000);
  const auto a = welch_psd(x, 500.0);
  const auto b = welch_psd(3.0 * x, 500.0);
  EXPECT_TRUE(b.density.isApprox(9.0 * a.density, 1e-12));
}

TEST(Tapers, PeriodicShapes) {
  const auto h = make_taper(Taper::hann, 8);
  EXPECT_DOUBLE_EQ(h(0), 0.0);
  EXPECT_NEAR(h(4), 1.0, 1e-15);
  EXPECT_NEAR(h(2), 0.5, 1e-15);
  EXPECT_TRUE(make_taper(Taper::rectangular, 5).isOnes());
  EXPECT_NEAR(make_taper(Taper::hamming, 8)(0), 0.08, 1e-15);
  EXPECT_EQ(taper_from_string(to_string(Taper::hamming)), Taper::hamming);
}

TEST(Bands, SinesLandInTheirBand) {
  const struct {
    double f;
    const BandDef* band;
  } cases[] = {{2.0, &bands::delta}, {6.0, &bands::theta}, {10.0, &bands::alpha},
               {20.0, &bands::beta}, {60.0, &bands::gamma}};
  for (const auto& c : cases) {
    const auto psd = welch_psd(sine(c.f, 500.0, 5000), 500.0);
    EXPECT_GE(relative_power(psd, *c.band), 0.95) << c.f;
    EXPECT_NEAR(peak_frequency(psd, *c.band).hz, c.f, 0.5) << c.f;
  }
}

TEST(Bands, HalfOpenEdges) {
  Psd psd;
  psd.df = 0.5;
  psd.freqs = Eigen::VectorXd::LinSpaced(21, 0.0, 10.0);
  psd.density = Eigen::VectorXd::Zero(21);
  psd.density(8) = 1.0;  // 4.0 Hz belongs to theta, not delta
  EXPECT_EQ(band_power(psd, bands::delta), 0.0);
  EXPECT_DOUBLE_EQ(band_power(psd, bands::theta), 0.5);
  EXPECT_DOUBLE_EQ(band_power(psd, {"dc", 0.0, 0.5}), 0.0);
}

TEST(Bands, BandNarrowerThanResolutionThrows) {
  const auto psd = welch_psd(white(5, 5000), 500.0);
  EXPECT_THROW(band_power(psd, {"narrow", 10.1, 10.3}), BandResolutionError);
}

TEST(Bands, RelativePowersSumToOneOverPartition) {
  const auto psd = welch_psd(white(9, 5000), 500.0);
  double s = 0.0;
  for (const auto& b : bands::canonical) s += relative_power(psd, b);
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Peak, TiesPickLowestFrequency) {
  Psd psd;
  psd.df = 0.5;
  psd.freqs = Eigen::VectorXd::LinSpaced(41, 0.0, 20.0);
  psd.density = Eigen::VectorXd::Zero(41);
  psd.density(18) = 2.0;  // 9 Hz
  psd.density(22) = 2.0;  // 11 Hz
  EXPECT_DOUBLE_EQ(peak_frequency(psd, bands::alpha).hz, 9.0);
  EXPECT_FALSE(peak_frequency(psd, bands::alpha).degenerate);
}

TEST(Entropy, FlatSpectrumIsOneSpikeIsZero) {
  Psd psd;
  psd.df = 0.5;
  psd.freqs = Eigen::VectorXd::LinSpaced(401, 0.0, 200.0);
  psd.density = Eigen::VectorXd::Ones(401);
  EXPECT_NEAR(spectral_entropy(psd), 1.0, 1e-12);
  psd.density.setZero();
  psd.density(20) = 5.0;
  EXPECT_NEAR(spectral_entropy(psd), 0.0, 1e-15);
}

TEST(Entropy, WithinUnitIntervalOnNoise) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const double h = spectral_entropy(welch_psd(white(s, 5000), 500.0));
    EXPECT_GT(h, 0.9);
    EXPECT_LE(h, 1.0);
  }
}

TEST(PsdCsv, HeaderAndRows) {
  const auto psd = welch_psd(white(2, 5000), 500.0);
  std::ostringstream os;
  write_psd_csv(psd, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "freq_hz,density");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 501);
}

TEST(Welch, TenHertzSine) {
  const auto psd = welch_psd(sine(10.0, 500.0, 5000), 500.0);
  Eigen::Index k = 0;
  psd.density.maxCoeff(&k);
  EXPECT_NEAR(psd.freqs(k), 10.0, psd.df);
  EXPECT_NEAR(psd.density.sum() * psd.df, 0.5, 0.01);
}

TEST(Bands, FlatDensityRectangles) {
  Psd psd;
  psd.df = 0.5;
  psd.freqs = Eigen::VectorXd::LinSpaced(501, 0.0, 250.0);
  psd.density = Eigen::VectorXd::Ones(501);
  EXPECT_NEAR(band_power(psd, bands::delta), 3.5, 1e-12);
  EXPECT_NEAR(relative_power(psd, bands::delta), 3.5 / 99.5, 1e-12);
  EXPECT_DOUBLE_EQ(peak_frequency(psd, bands::beta).hz, 12.0);
  psd.density.setZero();
  EXPECT_EQ(band_power(psd, bands::gamma), 0.0);
}

TEST(Bands, ScalingInvariance) {
  const Eigen::VectorXd x = white(21, 5000) + sine(9.0, 500.0, 5000, 2.0);
  const auto a = welch_psd(x, 500.0);
  for (double c : {0.01, 3.0, 1000.0}) {
    const auto b = welch_psd(c * x, 500.0);
    for (const auto& band : bands::canonical) {
      EXPECT_NEAR(relative_power(b, band), relative_power(a, band), 1e-12);
      EXPECT_EQ(peak_frequency(b, band).hz, peak_frequency(a, band).hz);
      EXPECT_NEAR(band_power(b, band), c * c * band_power(a, band), 1e-9 * c * c * band_power(a, band));
    }
    EXPECT_NEAR(spectral_entropy(b), spectral_entropy(a), 1e-12);
  }
}

TEST(Welch, ZeroEpoch) {
  const auto psd = welch_psd(Eigen::VectorXd::Zero(5000), 500.0);
  EXPECT_TRUE(psd.density.isZero(0.0));
}
