#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vigil/dataio.hpp"
#include "vigil/errors.hpp"
#include "vigil/spectral.hpp"

namespace vigil {

// ---------------------------------------------------------------------------
// Time-domain descriptors
// ---------------------------------------------------------------------------

/// Max/min locations of one MMD window.
struct MmdWindow {
  Eigen::Index argmax = 0;  // within the window, first occurrence
  Eigen::Index argmin = 0;
  double delta_index = 0.0;      // samples
  double delta_amplitude = 0.0;  // µV
  double distance() const { return std::hypot(delta_index, delta_amplitude); }
};

template <typename Derived>
std::vector<MmdWindow> mmd_windows(const Eigen::MatrixBase<Derived>& x,
                                   Eigen::Index window_len) {
  const Eigen::Index n = x.size();
  if (window_len <= 0 || window_len > n || n % window_len != 0) {
    throw ConfigError("MMD window " + std::to_string(window_len) +
                      " must divide the epoch length " + std::to_string(n));
  }
  std::vector<MmdWindow> out;
  out.reserve(static_cast<std::size_t>(n / window_len));
  for (Eigen::Index start = 0; start < n; start += window_len) {
    MmdWindow w;
    for (Eigen::Index i = 1; i < window_len; ++i) {
      const auto v = x(start + i);
      if (v > x(start + w.argmax)) w.argmax = i;
      if (v < x(start + w.argmin)) w.argmin = i;
    }
    w.delta_index = static_cast<double>(w.argmax - w.argmin);
    w.delta_amplitude = static_cast<double>(x(start + w.argmax) - x(start + w.argmin));
    out.push_back(w);
  }
  return out;
}

/// Maximum-minimum distance: sum over non-overlapping windows of the
/// Euclidean distance between the (index, amplitude) points of the window
/// maximum and minimum. Index is in samples and amplitude in µV.
template <typename Derived>
double mmd(const Eigen::MatrixBase<Derived>& x, Eigen::Index window_len = 100) {
  double total = 0.0;
  for (const auto& w : mmd_windows(x, window_len)) total += w.distance();
  return total;
}

struct Hjorth {
  double activity = 0.0;    // µV²
  double mobility = 0.0;
  double complexity = 0.0;
};

namespace detail {
template <typename Derived>
double population_variance(const Eigen::MatrixBase<Derived>& v) {
  const double mean = v.mean();
  return (v.array() - mean).square().mean();
}
}  // namespace detail

/// Hjorth parameters from first differences. Degenerate inputs map to zeros:
/// a constant signal gives (0,0,0); a signal with constant slope gives
/// mobility = complexity = 0.
template <typename Derived>
Hjorth hjorth(const Eigen::MatrixBase<Derived>& x) {
  const Eigen::Index n = x.size();
  if (n < 3) throw InsufficientDataError("Hjorth parameters need >= 3 samples");
  const Eigen::VectorXd v = x.template cast<double>();
  const Eigen::VectorXd d1 = v.tail(n - 1) - v.head(n - 1);
  const Eigen::VectorXd d2 = d1.tail(n - 2) - d1.head(n - 2);
  Hjorth h;
  h.activity = detail::population_variance(v);
  if (!(h.activity > 0.0)) return {};
  const double var_d1 = detail::population_variance(d1);
  if (!(var_d1 > 0.0)) return h;
  const double var_d2 = detail::population_variance(d2);
  h.mobility = std::sqrt(var_d1 / h.activity);
  h.complexity = std::sqrt(var_d2 / var_d1) / h.mobility;
  return h;
}

// ---------------------------------------------------------------------------
// Feature schema and extraction
// ---------------------------------------------------------------------------

enum class SchemaVariant { compact, extended, raw_plus_compact, custom };

std::string to_string(SchemaVariant v);
SchemaVariant schema_variant_from_string(const std::string& name);

/// Ordered feature names. The id is a hash of the names in order, so a CSV
/// header alone identifies the schema.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  FeatureSchema(std::vector<std::string> names, SchemaVariant variant);

  static FeatureSchema compact();
  static FeatureSchema extended();
  static FeatureSchema raw_plus_compact(std::size_t n_raw = kDefaultEpochSamples);
  static FeatureSchema of(SchemaVariant v);

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  SchemaVariant variant() const { return variant_; }
  const std::string& id() const { return id_; }
  std::optional<std::size_t> index_of(const std::string& name) const;

  bool operator==(const FeatureSchema& o) const { return id_ == o.id_; }

 private:
  std::vector<std::string> names_;
  SchemaVariant variant_ = SchemaVariant::custom;
  std::string id_;
};

std::string schema_id_for(const std::vector<std::string>& names);

struct FeatureVector {
  Eigen::VectorXd values;
  std::string schema_id;
  std::vector<std::string> qc_flags;  // degenerate-feature notes
};

struct FeatureConfig {
  double fs = kDefaultFs;
  WelchConfig welch;
  Eigen::Index mmd_window = 100;
  std::size_t epoch_samples = kDefaultEpochSamples;
};

/// Values in schema order. Raw sample names are `s<k>`; engineered names are
/// `<band>_power`, `<band>_relpower`, `<band>_peak`, `<band>_entropy`,
/// `spectral_entropy`, `mmd`, `activity`, `mobility`, `complexity`.
FeatureVector extract_features(const Epoch& epoch, const FeatureSchema& schema,
                               const FeatureConfig& config = {});

// ---------------------------------------------------------------------------
// Feature tables
// ---------------------------------------------------------------------------

struct FeatureTable {
  FeatureSchema schema;
  Eigen::MatrixXd X;  // rows = epochs, columns = schema order
  std::vector<std::optional<VigilanceState>> labels;
  std::vector<std::vector<std::string>> qc_flags;  // per row; may be empty

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  std::vector<int> label_codes() const;  // throws InputError when unlabeled
  FeatureTable subset(std::span<const std::size_t> rows) const;
};

/// Row-parallel extraction; results do not depend on `threads`.
FeatureTable extract_table(const Dataset& ds, const FeatureSchema& schema,
                           const FeatureConfig& config = {}, unsigned threads = 1);

/// Header = schema names + `label`; values in shortest round-trip form.
void write_feature_csv(const FeatureTable& t, std::ostream& os);
void save_feature_csv(const FeatureTable& t, const std::filesystem::path& path);
FeatureTable read_feature_csv(std::istream& is);
FeatureTable load_feature_csv(const std::filesystem::path& path);

/// Reorders columns to `names`. Throws SchemaError naming both schema ids
/// when the name sets differ.
FeatureTable align_features(const FeatureTable& t, const std::vector<std::string>& names);

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;  // population standard deviation
  std::vector<bool> zero_variance;
  std::string schema_id;

  Eigen::Index size() const { return mean.size(); }
};

/// Per-column mean and population sd of training rows.
Standardizer fit_standardizer(const Eigen::Ref<const Eigen::MatrixXd>& rows,
                              const std::string& schema_id = {});
Standardizer fit_standardizer(std::span<const FeatureVector> rows);

/// (x - mean) / sd; zero-variance columns map to 0.
FeatureVector apply_standardizer(const Standardizer& s, const FeatureVector& row);
Eigen::VectorXd standardize(const Standardizer& s,
                            const Eigen::Ref<const Eigen::VectorXd>& row);
Eigen::MatrixXd standardize_rows(const Standardizer& s,
                                 const Eigen::Ref<const Eigen::MatrixXd>& rows);
/// Inverse transform (zero-variance columns return their mean).
Eigen::VectorXd unstandardize(const Standardizer& s,
                              const Eigen::Ref<const Eigen::VectorXd>& z);

}  // namespace vigil
