#include "vigil/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "vigil/errors.hpp"
#include "vigil/rng.hpp"
#include "vigil/textio.hpp"

namespace vigil {

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, int n_classes) {
  if (y_true.size() != y_pred.size()) {
    throw InputError("label vectors differ in length (" + std::to_string(y_true.size()) + " vs " +
                     std::to_string(y_pred.size()) + ")");
  }
  ConfusionMatrix cm;
  cm.counts = Eigen::MatrixXd::Zero(n_classes, n_classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if (t < 0 || t >= n_classes || p < 0 || p >= n_classes) {
      throw InputError("label out of range at position " + std::to_string(i));
    }
    cm.counts(t, p) += 1.0;
  }
  return cm;
}

namespace {
double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }
}  // namespace

MetricsReport metrics(const ConfusionMatrix& cm) {
  const Eigen::Index k = cm.counts.rows();
  MetricsReport r;
  r.precision.resize(k);
  r.recall.resize(k);
  r.f1.resize(k);
  const Eigen::VectorXd row_sum = cm.counts.rowwise().sum();
  const Eigen::VectorXd col_sum = cm.counts.colwise().sum().transpose();
  for (Eigen::Index c = 0; c < k; ++c) {
    const double tp = cm.counts(c, c);
    r.precision[c] = ratio(tp, col_sum[c]);
    r.recall[c] = ratio(tp, row_sum[c]);
    r.f1[c] = ratio(2.0 * r.precision[c] * r.recall[c], r.precision[c] + r.recall[c]);
  }
  r.accuracy = ratio(cm.counts.trace(), cm.counts.sum());
  r.macro_precision = r.precision.mean();
  r.macro_recall = r.recall.mean();
  r.macro_f1 = r.f1.mean();
  return r;
}

namespace {

void check_probs(const Eigen::Ref<const Eigen::MatrixXd>& probs, std::span<const int> y) {
  if (static_cast<std::size_t>(probs.rows()) != y.size()) {
    throw InputError("probability rows (" + std::to_string(probs.rows()) + ") and labels (" +
                     std::to_string(y.size()) + ") differ");
  }
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const auto row = probs.row(i);
    if (!row.allFinite() || row.minCoeff() < -1e-9 || std::abs(row.sum() - 1.0) > 1e-9) {
      throw InputError("probability row " + std::to_string(i) + " is off the simplex");
    }
    const int t = y[static_cast<std::size_t>(i)];
    if (t < 0 || t >= probs.cols()) throw InputError("label out of range at row " + std::to_string(i));
  }
}

// Sums in sorted order so the result does not depend on sample order.
double ordered_sum(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

}  // namespace

double brier(const Eigen::Ref<const Eigen::MatrixXd>& probs, std::span<const int> y_true) {
  check_probs(probs, y_true);
  if (probs.rows() == 0) return 0.0;
  std::vector<double> terms(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index k = 0; k < probs.cols(); ++k) {
      const double d = probs(i, k) - (k == y_true[static_cast<std::size_t>(i)] ? 1.0 : 0.0);
      row += d * d;
    }
    terms[static_cast<std::size_t>(i)] = row;
  }
  return ordered_sum(std::move(terms)) / static_cast<double>(probs.rows());
}

CalibrationReport reliability(const Eigen::Ref<const Eigen::MatrixXd>& probs,
                              std::span<const int> y_true, int n_bins) {
  if (n_bins < 1) throw ConfigError("reliability needs at least one bin");
  check_probs(probs, y_true);
  CalibrationReport rep;
  rep.bins.resize(static_cast<std::size_t>(n_bins));
  std::vector<std::vector<double>> confs(rep.bins.size());
  std::vector<double> correct(rep.bins.size(), 0.0);
  for (int b = 0; b < n_bins; ++b) {
    rep.bins[static_cast<std::size_t>(b)].lo = static_cast<double>(b) / n_bins;
    rep.bins[static_cast<std::size_t>(b)].hi = static_cast<double>(b + 1) / n_bins;
  }
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index pred = 0;
    const double conf = probs.row(i).maxCoeff(&pred);
    const auto b = static_cast<std::size_t>(
        std::clamp(static_cast<int>(std::floor(conf * n_bins)), 0, n_bins - 1));
    ++rep.bins[b].count;
    confs[b].push_back(conf);
    correct[b] += pred == y_true[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  }
  for (std::size_t b = 0; b < rep.bins.size(); ++b) {
    auto& bin = rep.bins[b];
    if (bin.count == 0) continue;
    bin.mean_confidence = ordered_sum(std::move(confs[b])) / static_cast<double>(bin.count);
    bin.accuracy = correct[b] / static_cast<double>(bin.count);
    rep.max_deviation = std::max(rep.max_deviation, std::abs(bin.mean_confidence - bin.accuracy));
  }
  rep.brier = brier(probs, y_true);
  return rep;
}

void write_metrics_text(const MetricsReport& m, const ConfusionMatrix& cm, std::ostream& os) {
  auto pct = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * v << '%';
    return s.str();
  };
  os << std::left << std::setw(12) << "class" << std::right << std::setw(12) << "precision"
     << std::setw(12) << "recall" << std::setw(12) << "f1" << std::setw(10) << "support" << '\n';
  for (Eigen::Index c = 0; c < m.precision.size(); ++c) {
    os << std::left << std::setw(12) << to_string(state_from_code(static_cast<int>(c))) << std::right
       << std::setw(12) << pct(m.precision[c]) << std::setw(12) << pct(m.recall[c]) << std::setw(12)
       << pct(m.f1[c]) << std::setw(10) << static_cast<long long>(cm.counts.row(c).sum()) << '\n';
  }
  os << std::left << std::setw(12) << "macro" << std::right << std::setw(12) << pct(m.macro_precision)
     << std::setw(12) << pct(m.macro_recall) << std::setw(12) << pct(m.macro_f1) << std::setw(10)
     << cm.total() << '\n';
  os << "accuracy " << pct(m.accuracy) << '\n';
  os << "confusion (rows = true, columns = predicted)\n";
  for (Eigen::Index r = 0; r < cm.counts.rows(); ++r) {
    os << std::left << std::setw(8) << to_string(state_from_code(static_cast<int>(r))) << std::right;
    for (Eigen::Index c = 0; c < cm.counts.cols(); ++c) {
      os << std::setw(8) << static_cast<long long>(cm.counts(r, c));
    }
    os << '\n';
  }
}

void write_metrics_csv(const MetricsReport& m, std::ostream& os) {
  os << "metric,class,value\n";
  os << "accuracy,all," << format_exact(m.accuracy) << '\n';
  os << "precision,macro," << format_exact(m.macro_precision) << '\n';
  os << "recall,macro," << format_exact(m.macro_recall) << '\n';
  os << "f1,macro," << format_exact(m.macro_f1) << '\n';
  for (Eigen::Index c = 0; c < m.precision.size(); ++c) {
    const auto name = to_string(state_from_code(static_cast<int>(c)));
    os << "precision," << name << ',' << format_exact(m.precision[c]) << '\n';
    os << "recall," << name << ',' << format_exact(m.recall[c]) << '\n';
    os << "f1," << name << ',' << format_exact(m.f1[c]) << '\n';
  }
}

void write_reliability_csv(const CalibrationReport& r, std::ostream& os) {
  os << "bin_lo,bin_hi,count,mean_conf,accuracy\n";
  for (const auto& b : r.bins) {
    os << format_exact(b.lo) << ',' << format_exact(b.hi) << ',' << b.count << ','
       << format_exact(b.mean_confidence) << ',' << format_exact(b.accuracy) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

std::vector<HyperParams> GridSpec::configurations() const {
  if (params.empty()) throw ConfigError("grid has no parameters");
  std::vector<HyperParams> out{HyperParams{}};
  for (const auto& [name, values] : params) {
    if (values.empty()) throw ConfigError("grid parameter '" + name + "' has no values");
    std::vector<HyperParams> next;
    for (const auto& partial : out) {
      for (double v : values) {
        auto p = partial;
        p[name] = v;
        next.push_back(std::move(p));
      }
    }
    out = std::move(next);
  }
  return out;
}

GridSpec parse_grid(const std::string& text, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  GridSpec g;
  g.folds = folds;
  g.seed = seed;
  for (auto part : split(text, ';')) {
    part = trim(part);
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string_view::npos) throw ConfigError("grid entry '" + std::string(part) + "' lacks '='");
    const std::string name(trim(part.substr(0, eq)));
    std::vector<double> values;
    for (auto v : split(part.substr(eq + 1), ',')) values.push_back(parse_double(v, "grid " + name));
    g.params.emplace_back(name, std::move(values));
  }
  if (g.params.empty()) throw ConfigError("empty grid");
  return g;
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [c, members] : by_class) {
    if (static_cast<int>(members.size()) < folds) {
      throw StratificationError("class " + std::to_string(c) + " has " +
                                std::to_string(members.size()) + " rows, fewer than " +
                                std::to_string(folds) + " folds");
    }
  }
  std::vector<int> fold(labels.size(), -1);
  for (auto& [c, members] : by_class) {
    Pcg32 rng(derive_seed(seed, static_cast<std::uint64_t>(c), 0xf01d));
    shuffle(members, rng);
    for (std::size_t i = 0; i < members.size(); ++i) fold[members[i]] = static_cast<int>(i % folds);
  }
  return fold;
}

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

}  // namespace

std::vector<CvResult> cross_validate(const FeatureTable& data, const GridSpec& grid,
                                     ModelFamily family, const TrainOptions& base) {
  const auto y = data.label_codes();
  const auto fold = stratified_folds(y, grid.folds, grid.seed);
  const auto configs = grid.configurations();
  std::vector<CvResult> results;
  for (std::size_t ci = 0; ci < configs.size(); ++ci) {
    TrainOptions opts = base;
    switch (family) {
      case ModelFamily::gbt:
        apply_params(opts.gbt, configs[ci]);
        break;
      case ModelFamily::logistic:
        apply_params(opts.logistic, configs[ci]);
        break;
      case ModelFamily::mlp:
        apply_params(opts.mlp, configs[ci]);
        break;
    }
    CvResult r;
    r.config_index = ci;
    r.params = configs[ci];
    for (int f = 0; f < grid.folds; ++f) {
      std::vector<std::size_t> tr, te;
      for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == f ? te : tr).push_back(i);
      const auto train = data.subset(tr);
      const auto test = data.subset(te);
      const auto model = train_family(family, train, opts).model;
      const Eigen::MatrixXd probs = predict_proba_any(model, test.X);
      std::vector<int> pred(te.size());
      for (std::size_t i = 0; i < te.size(); ++i) {
        pred[i] = argmax(probs.row(static_cast<Eigen::Index>(i)).transpose());
      }
      const auto m = metrics(confusion(test.label_codes(), pred));
      r.fold_accuracy.push_back(m.accuracy);
      r.fold_macro_f1.push_back(m.macro_f1);
    }
    std::tie(r.mean_accuracy, r.sd_accuracy) = mean_sd(r.fold_accuracy);
    std::tie(r.mean_macro_f1, r.sd_macro_f1) = mean_sd(r.fold_macro_f1);
    results.push_back(std::move(r));
  }
  std::stable_sort(results.begin(), results.end(), [](const CvResult& a, const CvResult& b) {
    if (a.mean_macro_f1 != b.mean_macro_f1) return a.mean_macro_f1 > b.mean_macro_f1;
    if (a.mean_accuracy != b.mean_accuracy) return a.mean_accuracy > b.mean_accuracy;
    return a.config_index < b.config_index;
  });
  return results;
}

void write_cv_csv(const std::vector<CvResult>& results, std::ostream& os) {
  os << "rank,config";
  std::vector<std::string> keys;
  if (!results.empty()) {
    for (const auto& [k, v] : results.front().params) keys.push_back(k);
  }
  for (const auto& k : keys) os << ',' << k;
  os << ",mean_macro_f1,sd_macro_f1,mean_accuracy,sd_accuracy\n";
  for (std::size_t r = 0; r < results.size(); ++r) {
    const auto& res = results[r];
    os << r + 1 << ',' << res.config_index;
    for (const auto& k : keys) os << ',' << format_exact(res.params.at(k));
    os << ',' << format_exact(res.mean_macro_f1) << ',' << format_exact(res.sd_macro_f1) << ','
       << format_exact(res.mean_accuracy) << ',' << format_exact(res.sd_accuracy) << '\n';
  }
}

}  // namespace vigil
