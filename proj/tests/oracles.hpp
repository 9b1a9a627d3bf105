#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They favour directness over speed and share no code with the
// library beyond the public data types.

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include "vigil/gbt.hpp"
#include "vigil/rng.hpp"

namespace oracle {

// ---------------------------------------------------------------------------
// Spectral
// ---------------------------------------------------------------------------

inline std::vector<double> periodic_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

/// Welch PSD with a direct O(n²) DFT per segment.
inline std::vector<double> welch_dft(const Eigen::VectorXd& x, double fs, std::size_t seg,
                                     std::size_t step) {
  const auto w = periodic_hann(seg);
  double wss = 0.0;
  for (double v : w) wss += v * v;
  const std::size_t nbins = seg / 2 + 1;
  std::vector<double> acc(nbins, 0.0);
  std::size_t count = 0;
  for (std::size_t start = 0; start + seg <= static_cast<std::size_t>(x.size()); start += step) {
    double mean = 0.0;
    for (std::size_t i = 0; i < seg; ++i) mean += x(static_cast<Eigen::Index>(start + i));
    mean /= static_cast<double>(seg);
    for (std::size_t k = 0; k < nbins; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t i = 0; i < seg; ++i) {
        const double v = (x(static_cast<Eigen::Index>(start + i)) - mean) * w[i];
        const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * i % seg) /
                           static_cast<double>(seg);
        re += v * std::cos(ang);
        im += v * std::sin(ang);
      }
      double p = (re * re + im * im) / (fs * wss);
      if (k != 0 && !(seg % 2 == 0 && k == seg / 2)) p *= 2.0;
      acc[k] += p;
    }
    ++count;
  }
  for (double& v : acc) v /= static_cast<double>(count);
  return acc;
}

// ---------------------------------------------------------------------------
// Time domain
// ---------------------------------------------------------------------------

/// MMD by rescanning every window with the standard algorithms.
inline double mmd_rescan(const std::vector<double>& x, std::size_t w) {
  double total = 0.0;
  for (std::size_t s = 0; s + w <= x.size(); s += w) {
    const auto b = x.begin() + static_cast<std::ptrdiff_t>(s);
    const auto e = b + static_cast<std::ptrdiff_t>(w);
    const auto mx = std::max_element(b, e);
    const auto mn = std::min_element(b, e);
    const double di = static_cast<double>(mx - mn);
    const double da = *mx - *mn;
    total += std::sqrt(di * di + da * da);
  }
  return total;
}

inline double pop_var(const std::vector<double>& v) {
  double m = 0.0;
  for (double a : v) m += a;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double a : v) s += (a - m) * (a - m);
  return s / static_cast<double>(v.size());
}

inline std::vector<double> diff(const std::vector<double>& v) {
  std::vector<double> d;
  for (std::size_t i = 1; i < v.size(); ++i) d.push_back(v[i] - v[i - 1]);
  return d;
}

// ---------------------------------------------------------------------------
// Split search
// ---------------------------------------------------------------------------

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

/// Gain of one candidate split with left/right sums taken from scratch;
/// nullopt when a child falls below `min_child_weight`.
inline std::optional<double> split_gain(const Eigen::MatrixXd& X, const std::vector<double>& g,
                                        const std::vector<double>& h, int feature, double thr,
                                        double lambda, double gamma, double min_child_weight) {
  double gl = 0, hl = 0, gr = 0, hr = 0;
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const auto i = static_cast<std::size_t>(r);
    if (X(r, feature) < thr) {
      gl += g[i];
      hl += h[i];
    } else {
      gr += g[i];
      hr += h[i];
    }
  }
  if (hl < min_child_weight || hr < min_child_weight) return std::nullopt;
  const double G = gl + gr, H = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - G * G / (H + lambda)) - gamma;
}

/// Enumerates every (feature, threshold) candidate and sums the left/right
/// statistics from scratch for each one.
inline std::optional<Split> best_split(const Eigen::MatrixXd& X, const std::vector<double>& g,
                                       const std::vector<double>& h, double lambda,
                                       double gamma, double min_child_weight) {
  std::optional<Split> best;
  const auto n = X.rows();
  for (Eigen::Index f = 0; f < X.cols(); ++f) {
    std::vector<double> vals(X.col(f).data(), X.col(f).data() + n);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      double thr = vals[i] + (vals[i + 1] - vals[i]) / 2.0;
      if (!(thr > vals[i])) thr = vals[i + 1];
      double gl = 0, hl = 0, gr = 0, hr = 0;
      for (Eigen::Index r = 0; r < n; ++r) {
        if (X(r, f) < thr) {
          gl += g[static_cast<std::size_t>(r)];
          hl += h[static_cast<std::size_t>(r)];
        } else {
          gr += g[static_cast<std::size_t>(r)];
          hr += h[static_cast<std::size_t>(r)];
        }
      }
      if (hl < min_child_weight || hr < min_child_weight) continue;
      const double G = gl + gr, H = hl + hr;
      const double gain =
          0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - G * G / (H + lambda)) - gamma;
      if (gain > 0.0 && (!best || gain > best->gain)) best = Split{static_cast<int>(f), thr, gain};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Shapley values
// ---------------------------------------------------------------------------

/// Expected leaf value of `tree` when only the features in `mask` are known;
/// unknown splits average the children by training cover.
inline double conditional_expectation(const vigil::Tree& tree, const Eigen::VectorXd& x,
                                      unsigned mask, int node = 0) {
  const auto& n = tree.nodes[static_cast<std::size_t>(node)];
  if (n.is_leaf()) return n.weight;
  if (mask & (1u << n.feature)) {
    return conditional_expectation(tree, x, mask, x(n.feature) < n.threshold ? n.left : n.right);
  }
  const auto& l = tree.nodes[static_cast<std::size_t>(n.left)];
  const auto& r = tree.nodes[static_cast<std::size_t>(n.right)];
  return (l.cover * conditional_expectation(tree, x, mask, n.left) +
          r.cover * conditional_expectation(tree, x, mask, n.right)) /
         n.cover;
}

/// Shapley values of a set function over `m` players by full subset
/// enumeration.
inline Eigen::VectorXd shapley(int m, const std::function<double(unsigned)>& value) {
  std::vector<double> fact(static_cast<std::size_t>(m) + 1, 1.0);
  for (int i = 1; i <= m; ++i) fact[static_cast<std::size_t>(i)] = fact[static_cast<std::size_t>(i) - 1] * i;
  std::vector<double> v(1u << m);
  for (unsigned s = 0; s < (1u << m); ++s) v[s] = value(s);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) {
    for (unsigned s = 0; s < (1u << m); ++s) {
      if (s & (1u << i)) continue;
      const int size = std::popcount(s);
      const double wgt = fact[static_cast<std::size_t>(size)] *
                         fact[static_cast<std::size_t>(m - size - 1)] / fact[static_cast<std::size_t>(m)];
      phi(i) += wgt * (v[s | (1u << i)] - v[s]);
    }
  }
  return phi;
}

/// Brute-force margin-space Shapley values of one class of an ensemble.
inline Eigen::VectorXd ensemble_shapley(const vigil::GbtModel& model, const Eigen::VectorXd& x,
                                        int cls) {
  const int m = static_cast<int>(x.size());
  return shapley(m, [&](unsigned mask) {
    double v = model.base_score(cls);
    for (const auto& t : model.trees) {
      if (t.cls == cls) v += model.config.eta * conditional_expectation(t, x, mask);
    }
    return v;
  });
}

// ---------------------------------------------------------------------------
// Random models
// ---------------------------------------------------------------------------

namespace detail {
inline int grow(std::vector<vigil::TreeNode>& nodes, vigil::Pcg32& rng, int depth, int max_depth,
                int n_features) {
  const int id = static_cast<int>(nodes.size());
  nodes.emplace_back();
  const bool leaf = depth == max_depth || (depth > 0 && rng.uniform() < 0.3);
  if (leaf) {
    nodes[static_cast<std::size_t>(id)].weight = rng.uniform(-2.0, 2.0);
    nodes[static_cast<std::size_t>(id)].cover = 1.0 + rng.below(20);
    return id;
  }
  const int f = static_cast<int>(rng.below(static_cast<std::uint32_t>(n_features)));
  const double thr = rng.uniform(-1.0, 1.0);
  const int l = grow(nodes, rng, depth + 1, max_depth, n_features);
  const int r = grow(nodes, rng, depth + 1, max_depth, n_features);
  auto& n = nodes[static_cast<std::size_t>(id)];
  n.feature = f;
  n.threshold = thr;
  n.left = l;
  n.right = r;
  n.gain = rng.uniform(0.1, 1.0);
  n.cover = nodes[static_cast<std::size_t>(l)].cover + nodes[static_cast<std::size_t>(r)].cover;
  return id;
}
}  // namespace detail

/// Random ensemble with consistent covers (parent = sum of children).
inline vigil::GbtModel random_ensemble(vigil::Pcg32& rng, int n_features, int max_trees,
                                       int max_depth, int n_classes = 3) {
  vigil::GbtModel m;
  m.config.n_classes = n_classes;
  m.config.eta = rng.uniform(0.05, 1.0);
  const int rounds = 1 + static_cast<int>(rng.below(static_cast<std::uint32_t>(max_trees)));
  m.config.n_rounds = rounds;
  m.base_score = Eigen::VectorXd::Zero(n_classes);
  for (int k = 0; k < n_classes; ++k) m.base_score(k) = rng.uniform(-0.5, 0.5);
  for (int f = 0; f < n_features; ++f) m.feature_names.push_back("f" + std::to_string(f));
  for (int r = 0; r < rounds; ++r) {
    for (int k = 0; k < n_classes; ++k) {
      vigil::Tree t;
      t.round = r;
      t.cls = k;
      detail::grow(t.nodes, rng, 0,
                   1 + static_cast<int>(rng.below(static_cast<std::uint32_t>(max_depth))),
                   n_features);
      m.trees.push_back(std::move(t));
    }
  }
  return m;
}

inline Eigen::VectorXd random_point(vigil::Pcg32& rng, int d, double lo = -1.2, double hi = 1.2) {
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x(i) = rng.uniform(lo, hi);
  return x;
}

}  // namespace oracle
