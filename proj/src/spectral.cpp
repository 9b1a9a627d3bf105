#include "vigil/spectral.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <unsupported/Eigen/FFT>
#include <vector>

#include "vigil/errors.hpp"
#include "vigil/textio.hpp"

namespace vigil {

Taper taper_from_string(const std::string& name) {
  if (name == "hann") return Taper::hann;
  if (name == "hamming") return Taper::hamming;
  if (name == "rectangular" || name == "boxcar") return Taper::rectangular;
  throw ConfigError("unknown taper '" + name + "'");
}

std::string to_string(Taper t) {
  switch (t) {
    case Taper::hann:
      return "hann";
    case Taper::hamming:
      return "hamming";
    case Taper::rectangular:
      return "rectangular";
  }
  return "?";
}

Eigen::VectorXd make_taper(Taper t, std::size_t n) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(n));
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = std::cos(two_pi * static_cast<double>(i) / static_cast<double>(n));
    double v = 1.0;
    if (t == Taper::hann) v = 0.5 - 0.5 * c;
    if (t == Taper::hamming) v = 0.54 - 0.46 * c;
    w[static_cast<Eigen::Index>(i)] = v;
  }
  return w;
}

Psd welch_psd(const Eigen::Ref<const Eigen::VectorXd>& x, double fs,
              const WelchConfig& config) {
  const auto n = static_cast<std::size_t>(x.size());
  const std::size_t len = config.segment_len;
  if (!(fs > 0.0)) throw ConfigError("sampling rate must be positive");
  if (len < 2) throw ConfigError("Welch segment length must be >= 2");
  if (len > n) {
    throw ConfigError("Welch segment length " + std::to_string(len) +
                      " exceeds epoch length " + std::to_string(n));
  }
  if (!(config.overlap >= 0.0 && config.overlap < 1.0)) {
    throw ConfigError("Welch overlap must be in [0, 1)");
  }
  const auto overlap_samples =
      static_cast<std::size_t>(std::llround(config.overlap * static_cast<double>(len)));
  const std::size_t step = std::max<std::size_t>(1, len - overlap_samples);
  const std::size_t n_segments = 1 + (n - len) / step;

  const Eigen::VectorXd w = make_taper(config.window, len);
  const double scale = 1.0 / (fs * w.squaredNorm());
  const std::size_t n_bins = len / 2 + 1;

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_bins));
  Eigen::FFT<double> fft;
  std::vector<double> buf(len);
  std::vector<std::complex<double>> spec;
  for (std::size_t s = 0; s < n_segments; ++s) {
    const auto seg = x.segment(static_cast<Eigen::Index>(s * step),
                               static_cast<Eigen::Index>(len));
    const double mean = seg.mean();
    for (std::size_t i = 0; i < len; ++i) {
      buf[i] = (seg[static_cast<Eigen::Index>(i)] - mean) * w[static_cast<Eigen::Index>(i)];
    }
    fft.fwd(spec, buf);
    for (std::size_t k = 0; k < n_bins; ++k) {
      acc[static_cast<Eigen::Index>(k)] += std::norm(spec[k]);
    }
  }

  Psd psd;
  psd.df = fs / static_cast<double>(len);
  psd.freqs = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(n_bins), 0.0,
                                         psd.df * static_cast<double>(n_bins - 1));
  psd.density = acc * (scale / static_cast<double>(n_segments));
  // One-sided: double everything except DC and (for even lengths) Nyquist.
  const std::size_t last_doubled = len % 2 == 0 ? n_bins - 2 : n_bins - 1;
  for (std::size_t k = 1; k <= last_doubled; ++k) {
    psd.density[static_cast<Eigen::Index>(k)] *= 2.0;
  }
  return psd;
}

namespace {

// Index range [first, last) of bins inside the band.
std::pair<Eigen::Index, Eigen::Index> band_bins(const Psd& psd, const BandDef& band) {
  Eigen::Index first = psd.freqs.size();
  Eigen::Index last = 0;
  for (Eigen::Index i = 0; i < psd.freqs.size(); ++i) {
    if (psd.freqs[i] >= band.lo && psd.freqs[i] < band.hi) {
      first = std::min(first, i);
      last = i + 1;
    }
  }
  if (last <= first) {
    throw BandResolutionError("band '" + band.name + "' [" + format_exact(band.lo) +
                              ", " + format_exact(band.hi) +
                              ") contains no PSD bins");
  }
  return {first, last};
}

}  // namespace

double band_power(const Psd& psd, const BandDef& band) {
  const auto [first, last] = band_bins(psd, band);
  return psd.density.segment(first, last - first).sum() * psd.df;
}

double relative_power(const Psd& psd, const BandDef& band, const BandDef& total) {
  const double num = band_power(psd, band);
  const double den = band_power(psd, total);
  return den > 0.0 ? num / den : 0.0;
}

PeakFrequency peak_frequency(const Psd& psd, const BandDef& band) {
  const auto [first, last] = band_bins(psd, band);
  Eigen::Index best = first;
  for (Eigen::Index i = first + 1; i < last; ++i) {
    if (psd.density[i] > psd.density[best]) best = i;
  }
  if (!(psd.density[best] > 0.0)) return {band.lo, true};
  return {psd.freqs[best], false};
}

double spectral_entropy(const Psd& psd, const BandDef& range) {
  const auto [first, last] = band_bins(psd, range);
  const Eigen::Index m = last - first;
  const auto seg = psd.density.segment(first, m);
  const double total = seg.sum();
  if (!(total > 0.0) || m < 2) return 0.0;
  double h = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double p = seg[i] / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h / std::log(static_cast<double>(m));
}

void write_psd_csv(const Psd& psd, std::ostream& os) {
  os << "freq_hz,density\n";
  for (Eigen::Index i = 0; i < psd.freqs.size(); ++i) {
    os << format_exact(psd.freqs[i]) << ',' << format_exact(psd.density[i]) << '\n';
  }
}

}  // namespace vigil
