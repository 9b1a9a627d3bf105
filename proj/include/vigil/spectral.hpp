#pragma once

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>

namespace vigil {

/// One-sided power spectral density on a uniform grid 0..fs/2.
struct Psd {
  Eigen::VectorXd freqs;    // Hz
  Eigen::VectorXd density;  // µV²/Hz
  double df = 0.0;          // Hz
};

/// Half-open frequency band [lo, hi) in Hz.
struct BandDef {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
};

namespace bands {
inline const BandDef delta{"delta", 0.5, 4.0};
inline const BandDef theta{"theta", 4.0, 8.0};
inline const BandDef alpha{"alpha", 8.0, 12.0};
inline const BandDef beta{"beta", 12.0, 30.0};
inline const BandDef gamma{"gamma", 30.0, 100.0};
inline const BandDef total{"total", 0.5, 100.0};

inline const std::array<BandDef, 5> canonical = {delta, theta, alpha, beta, gamma};
}  // namespace bands

enum class Taper { hann, hamming, rectangular };

Taper taper_from_string(const std::string& name);
std::string to_string(Taper t);

/// Defaults: 2 s segments at 500 Hz, half overlap, Hann taper (df = 0.5 Hz,
/// nine segments per 10 s epoch).
struct WelchConfig {
  std::size_t segment_len = 1000;
  double overlap = 0.5;
  Taper window = Taper::hann;
};

/// Periodic taper of length n.
Eigen::VectorXd make_taper(Taper t, std::size_t n);

/// Welch estimate: each segment is mean-removed, tapered and transformed; the
/// periodograms are averaged and scaled to a density so that the integral of
/// the one-sided PSD equals the (mean-removed) signal power.
Psd welch_psd(const Eigen::Ref<const Eigen::VectorXd>& x, double fs,
              const WelchConfig& config = {});

/// Σ density·df over bins with lo ≤ f < hi. Throws BandResolutionError when
/// no bin falls inside the band.
double band_power(const Psd& psd, const BandDef& band);

/// band_power(band) / band_power(total); 0 when total power is 0.
double relative_power(const Psd& psd, const BandDef& band,
                      const BandDef& total = bands::total);

struct PeakFrequency {
  double hz = 0.0;
  bool degenerate = false;  // band held no power; hz is band.lo
};

/// Frequency of the largest density in the band, lowest frequency on ties.
PeakFrequency peak_frequency(const Psd& psd, const BandDef& band);

/// Normalized Shannon entropy of the density over the band bins, in [0, 1].
/// Returns 0 when the band holds no power.
double spectral_entropy(const Psd& psd, const BandDef& range = bands::total);

/// `freq_hz,density` rows.
void write_psd_csv(const Psd& psd, std::ostream& os);

}  // namespace vigil
