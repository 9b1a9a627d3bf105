#include "vigil/features.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "vigil/textio.hpp"

namespace vigil {

std::string to_string(SchemaVariant v) {
  switch (v) {
    case SchemaVariant::compact:
      return "compact";
    case SchemaVariant::extended:
      return "extended";
    case SchemaVariant::raw_plus_compact:
      return "raw_plus_compact";
    case SchemaVariant::custom:
      return "custom";
  }
  return "?";
}

SchemaVariant schema_variant_from_string(const std::string& name) {
  for (auto v : {SchemaVariant::compact, SchemaVariant::extended,
                 SchemaVariant::raw_plus_compact, SchemaVariant::custom}) {
    if (name == to_string(v)) return v;
  }
  throw ConfigError("unknown feature schema '" + name +
                    "' (expected compact, extended or raw_plus_compact)");
}

std::string schema_id_for(const std::vector<std::string>& names) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (const auto& n : names) {
    for (unsigned char c : n) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= '\n';
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fs-%016llx", static_cast<unsigned long long>(h));
  return buf;
}

FeatureSchema::FeatureSchema(std::vector<std::string> names, SchemaVariant variant)
    : names_(std::move(names)), variant_(variant), id_(schema_id_for(names_)) {
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (!seen.insert(n).second) throw SchemaError("duplicate feature name '" + n + "'");
  }
}

namespace {
const std::vector<std::string>& compact_names() {
  static const std::vector<std::string> names = {
      "delta_power", "theta_power",      "alpha_power", "beta_power", "gamma_power",
      "spectral_entropy", "mmd",         "mobility",    "complexity"};
  return names;
}
}  // namespace

FeatureSchema FeatureSchema::compact() {
  return FeatureSchema(compact_names(), SchemaVariant::compact);
}

FeatureSchema FeatureSchema::extended() {
  auto names = compact_names();
  for (const char* suffix : {"_relpower", "_peak", "_entropy"}) {
    for (const auto& b : bands::canonical) names.push_back(b.name + suffix);
  }
  names.push_back("activity");
  return FeatureSchema(std::move(names), SchemaVariant::extended);
}

FeatureSchema FeatureSchema::raw_plus_compact(std::size_t n_raw) {
  std::vector<std::string> names;
  names.reserve(n_raw + compact_names().size());
  for (std::size_t i = 0; i < n_raw; ++i) names.push_back("s" + std::to_string(i));
  names.insert(names.end(), compact_names().begin(), compact_names().end());
  return FeatureSchema(std::move(names), SchemaVariant::raw_plus_compact);
}

FeatureSchema FeatureSchema::of(SchemaVariant v) {
  switch (v) {
    case SchemaVariant::compact:
      return compact();
    case SchemaVariant::extended:
      return extended();
    case SchemaVariant::raw_plus_compact:
      return raw_plus_compact();
    case SchemaVariant::custom:
      break;
  }
  throw ConfigError("a custom schema needs explicit feature names");
}

std::optional<std::size_t> FeatureSchema::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

namespace {

const BandDef* find_band(const std::string& name) {
  for (const auto& b : bands::canonical) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

bool split_suffix(const std::string& name, const std::string& suffix, std::string& stem) {
  if (name.size() <= suffix.size() ||
      name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
    return false;
  }
  stem = name.substr(0, name.size() - suffix.size());
  return true;
}

// Lazily computed intermediates shared by the features of one epoch.
class EpochFeatures {
 public:
  EpochFeatures(const Epoch& e, const FeatureConfig& c) : epoch_(e), cfg_(c) {}

  double value(const std::string& name, std::vector<std::string>& flags) {
    if (name.size() > 1 && name[0] == 's' &&
        std::all_of(name.begin() + 1, name.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      const auto k = static_cast<Eigen::Index>(std::stoull(name.substr(1)));
      if (k >= epoch_.samples.size()) {
        throw SchemaError("raw feature '" + name + "' beyond epoch length");
      }
      return epoch_.samples[k];
    }
    if (name == "spectral_entropy") {
      const double v = spectral_entropy(psd(), bands::total);
      if (band_power(psd(), bands::total) <= 0.0) flags.push_back("spectral_entropy:zero_power");
      return v;
    }
    if (name == "mmd") return mmd(epoch_.samples, cfg_.mmd_window);
    if (name == "activity") return hj().activity;
    if (name == "mobility") return hj().mobility;
    if (name == "complexity") return hj().complexity;

    std::string stem;
    if (split_suffix(name, "_power", stem)) {
      if (auto* b = find_band(stem)) return band_power(psd(), *b);
    } else if (split_suffix(name, "_relpower", stem)) {
      if (auto* b = find_band(stem)) {
        if (band_power(psd(), bands::total) <= 0.0) flags.push_back(name + ":zero_power");
        return relative_power(psd(), *b);
      }
    } else if (split_suffix(name, "_peak", stem)) {
      if (auto* b = find_band(stem)) {
        const auto p = peak_frequency(psd(), *b);
        if (p.degenerate) flags.push_back(name + ":degenerate");
        return p.hz;
      }
    } else if (split_suffix(name, "_entropy", stem)) {
      if (auto* b = find_band(stem)) {
        if (band_power(psd(), *b) <= 0.0) flags.push_back(name + ":zero_power");
        return spectral_entropy(psd(), *b);
      }
    }
    throw SchemaError("unknown feature name '" + name + "'");
  }

 private:
  const Psd& psd() {
    if (!psd_) psd_ = welch_psd(epoch_.samples, cfg_.fs, cfg_.welch);
    return *psd_;
  }
  const Hjorth& hj() {
    if (!hjorth_) hjorth_ = hjorth(epoch_.samples);
    return *hjorth_;
  }

  const Epoch& epoch_;
  const FeatureConfig& cfg_;
  std::optional<Psd> psd_;
  std::optional<Hjorth> hjorth_;
};

}  // namespace

FeatureVector extract_features(const Epoch& epoch, const FeatureSchema& schema,
                               const FeatureConfig& config) {
  if (static_cast<std::size_t>(epoch.samples.size()) != config.epoch_samples) {
    throw InputError("epoch " + std::to_string(epoch.index) + " has " +
                     std::to_string(epoch.samples.size()) + " samples, expected " +
                     std::to_string(config.epoch_samples));
  }
  FeatureVector fv;
  fv.schema_id = schema.id();
  fv.values.resize(static_cast<Eigen::Index>(schema.size()));
  EpochFeatures ef(epoch, config);
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& name = schema.names()[j];
    try {
      fv.values[static_cast<Eigen::Index>(j)] = ef.value(name, fv.qc_flags);
    } catch (const SchemaError&) {
      throw;
    } catch (const Error& e) {
      throw InputError("feature '" + name + "' on epoch " +
                       std::to_string(epoch.index) + ": " + e.what());
    }
    if (!std::isfinite(fv.values[static_cast<Eigen::Index>(j)])) {
      throw InputError("feature '" + name + "' is not finite on epoch " +
                       std::to_string(epoch.index));
    }
  }
  return fv;
}

std::vector<int> FeatureTable::label_codes() const {
  std::vector<int> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) throw InputError("row " + std::to_string(i + 1) + " has no label");
    out.push_back(code(*labels[i]));
  }
  return out;
}

FeatureTable FeatureTable::subset(std::span<const std::size_t> idx) const {
  FeatureTable t;
  t.schema = schema;
  t.X.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    t.X.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(idx[r]));
    t.labels.push_back(labels[idx[r]]);
    if (!qc_flags.empty()) t.qc_flags.push_back(qc_flags[idx[r]]);
  }
  return t;
}

FeatureTable extract_table(const Dataset& ds, const FeatureSchema& schema,
                           const FeatureConfig& config, unsigned threads) {
  const std::size_t n = ds.size();
  FeatureTable t;
  t.schema = schema;
  t.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(schema.size()));
  t.labels.resize(n);
  t.qc_flags.resize(n);
  std::vector<std::exception_ptr> errors(n);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        auto fv = extract_features(ds.epochs[i], schema, config);
        t.X.row(static_cast<Eigen::Index>(i)) = fv.values.transpose();
        t.qc_flags[i] = std::move(fv.qc_flags);
      } catch (...) {
        errors[i] = std::current_exception();
      }
      t.labels[i] = ds.epochs[i].label;
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(n, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return t;
}

void write_feature_csv(const FeatureTable& t, std::ostream& os) {
  for (const auto& n : t.schema.names()) os << n << ',';
  os << "label\n";
  for (Eigen::Index r = 0; r < t.X.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.X.cols(); ++c) os << format_exact(t.X(r, c)) << ',';
    if (t.labels[static_cast<std::size_t>(r)]) os << to_string(*t.labels[static_cast<std::size_t>(r)]);
    os << '\n';
  }
}

void save_feature_csv(const FeatureTable& t, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& os) { write_feature_csv(t, os); });
}

FeatureTable read_feature_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("feature file is empty");
  const auto header = split(trim(line), ',');
  if (header.size() < 2 || trim(header.back()) != "label") {
    throw FormatError("feature header must end with a 'label' column");
  }
  std::vector<std::string> names;
  for (std::size_t i = 0; i + 1 < header.size(); ++i) names.emplace_back(trim(header[i]));

  SchemaVariant variant = SchemaVariant::custom;
  const auto id = schema_id_for(names);
  if (id == FeatureSchema::compact().id()) variant = SchemaVariant::compact;
  else if (id == FeatureSchema::extended().id()) variant = SchemaVariant::extended;
  else if (names.size() == kDefaultEpochSamples + 9 &&
           id == FeatureSchema::raw_plus_compact().id()) variant = SchemaVariant::raw_plus_compact;

  FeatureTable t;
  t.schema = FeatureSchema(std::move(names), variant);
  const std::size_t d = t.schema.size();
  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    const auto content = trim(line);
    if (content.empty()) continue;
    ++row;
    const auto cells = split(content, ',');
    if (cells.size() != d + 1) {
      throw FormatError("feature row " + std::to_string(row) + ": expected " +
                        std::to_string(d + 1) + " columns, found " +
                        std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < d; ++j) {
      values.push_back(parse_double(cells[j], "feature row " + std::to_string(row) +
                                                  " column '" + t.schema.names()[j] + "'"));
    }
    t.labels.push_back(parse_optional_label(trim(cells[d])));
  }
  t.X.resize(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < row; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      t.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = values[r * d + j];
    }
  }
  if (!t.X.allFinite()) throw InputError("feature file contains non-finite values");
  return t;
}

FeatureTable load_feature_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open feature file '" + path.string() + "'");
  return read_feature_csv(is);
}

FeatureTable align_features(const FeatureTable& t, const std::vector<std::string>& names) {
  const auto target_id = schema_id_for(names);
  if (target_id == t.schema.id()) return t;
  auto sorted_a = t.schema.names();
  auto sorted_b = names;
  std::sort(sorted_a.begin(), sorted_a.end());
  std::sort(sorted_b.begin(), sorted_b.end());
  if (sorted_a != sorted_b) {
    throw SchemaError("feature schema mismatch: data has " + t.schema.id() +
                      ", model expects " + target_id);
  }
  FeatureTable out;
  out.schema = FeatureSchema(names, SchemaVariant::custom);
  out.labels = t.labels;
  out.qc_flags = t.qc_flags;
  out.X.resize(t.X.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    out.X.col(static_cast<Eigen::Index>(j)) =
        t.X.col(static_cast<Eigen::Index>(*t.schema.index_of(names[j])));
  }
  return out;
}

Standardizer fit_standardizer(const Eigen::Ref<const Eigen::MatrixXd>& rows,
                              const std::string& schema_id) {
  if (rows.rows() < 2) throw InputError("standardizer needs at least 2 training rows");
  Standardizer s;
  s.schema_id = schema_id;
  s.mean = rows.colwise().mean().transpose();
  s.sd = ((rows.rowwise() - s.mean.transpose()).array().square().colwise().mean())
             .sqrt()
             .transpose();
  s.zero_variance.resize(static_cast<std::size_t>(s.mean.size()));
  for (Eigen::Index j = 0; j < s.sd.size(); ++j) {
    s.zero_variance[static_cast<std::size_t>(j)] = !(s.sd[j] > 0.0);
  }
  return s;
}

Standardizer fit_standardizer(std::span<const FeatureVector> rows) {
  if (rows.size() < 2) throw InputError("standardizer needs at least 2 training rows");
  const auto& id = rows.front().schema_id;
  const auto d = rows.front().values.size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].schema_id != id || rows[i].values.size() != d) {
      throw SchemaError("training row " + std::to_string(i) + " has schema " +
                        rows[i].schema_id + ", expected " + id);
    }
    m.row(static_cast<Eigen::Index>(i)) = rows[i].values.transpose();
  }
  return fit_standardizer(m, id);
}

Eigen::VectorXd standardize(const Standardizer& s,
                            const Eigen::Ref<const Eigen::VectorXd>& row) {
  if (row.size() != s.size()) {
    throw SchemaError("row has " + std::to_string(row.size()) +
                      " features, standardizer expects " + std::to_string(s.size()));
  }
  Eigen::VectorXd z(row.size());
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    z[j] = s.zero_variance[static_cast<std::size_t>(j)] ? 0.0 : (row[j] - s.mean[j]) / s.sd[j];
  }
  return z;
}

Eigen::MatrixXd standardize_rows(const Standardizer& s,
                                 const Eigen::Ref<const Eigen::MatrixXd>& rows) {
  if (rows.cols() != s.size()) {
    throw SchemaError("matrix has " + std::to_string(rows.cols()) +
                      " features, standardizer expects " + std::to_string(s.size()));
  }
  Eigen::MatrixXd z(rows.rows(), rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) z.row(r) = standardize(s, rows.row(r).transpose()).transpose();
  return z;
}

FeatureVector apply_standardizer(const Standardizer& s, const FeatureVector& row) {
  if (!s.schema_id.empty() && row.schema_id != s.schema_id) {
    throw SchemaError("row schema " + row.schema_id + " does not match standardizer schema " +
                      s.schema_id);
  }
  FeatureVector out;
  out.schema_id = row.schema_id;
  out.values = standardize(s, row.values);
  return out;
}

Eigen::VectorXd unstandardize(const Standardizer& s,
                              const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (z.size() != s.size()) throw SchemaError("inverse transform size mismatch");
  Eigen::VectorXd x(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    x[j] = s.zero_variance[static_cast<std::size_t>(j)] ? s.mean[j] : z[j] * s.sd[j] + s.mean[j];
  }
  return x;
}

}  // namespace vigil
