#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vigil/features.hpp"
#include "vigil/model_io.hpp"

namespace vigil {

/// Rows = true class, columns = predicted class.
struct ConfusionMatrix {
  Eigen::MatrixXd counts;  // integral values
  long long total() const { return static_cast<long long>(counts.sum()); }
};

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred,
                          int n_classes = kNumStates);

struct MetricsReport {
  double accuracy = 0.0;
  Eigen::VectorXd precision, recall, f1;  // per class
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

/// 0/0 ratios count as 0; macro values are unweighted class means.
MetricsReport metrics(const ConfusionMatrix& cm);

/// Mean over rows of Σ_k (p_k - [k == y])². Rows must lie on the simplex
/// within 1e-9.
double brier(const Eigen::Ref<const Eigen::MatrixXd>& probs, std::span<const int> y_true);

struct ReliabilityBin {
  double lo = 0.0, hi = 0.0;
  long long count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
};

struct CalibrationReport {
  std::vector<ReliabilityBin> bins;
  double max_deviation = 0.0;  // over nonempty bins
  double brier = 0.0;
};

/// Confidence = max class probability, binned by floor(conf · n_bins) with
/// conf = 1 in the last bin.
CalibrationReport reliability(const Eigen::Ref<const Eigen::MatrixXd>& probs,
                              std::span<const int> y_true, int n_bins = 10);

/// Aligned text table followed by per-class rows.
void write_metrics_text(const MetricsReport& m, const ConfusionMatrix& cm, std::ostream& os);
/// `metric,class,value`
void write_metrics_csv(const MetricsReport& m, std::ostream& os);
/// `bin_lo,bin_hi,count,mean_conf,accuracy`
void write_reliability_csv(const CalibrationReport& r, std::ostream& os);

// ---------------------------------------------------------------------------
// Cross-validated grid search
// ---------------------------------------------------------------------------

struct GridSpec {
  std::vector<std::pair<std::string, std::vector<double>>> params;
  int folds = 5;
  std::uint64_t seed = 42;

  /// Cartesian product, last parameter varying fastest.
  std::vector<HyperParams> configurations() const;
};

/// Parses "eta=0.01,0.1;n_rounds=5".
GridSpec parse_grid(const std::string& text, int folds, std::uint64_t seed);

/// Fold id per row: within each class, seeded shuffle then round-robin.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

struct CvResult {
  std::size_t config_index = 0;
  HyperParams params;
  std::vector<double> fold_accuracy;
  std::vector<double> fold_macro_f1;
  double mean_accuracy = 0.0, sd_accuracy = 0.0;
  double mean_macro_f1 = 0.0, sd_macro_f1 = 0.0;
};

/// Every configuration trained once per fold; ranked by mean macro-F1, then
/// mean accuracy, then configuration order.
std::vector<CvResult> cross_validate(const FeatureTable& data, const GridSpec& grid,
                                     ModelFamily family, const TrainOptions& base = {});

/// `rank,config,<param columns>,mean_macro_f1,sd_macro_f1,mean_accuracy,sd_accuracy`
void write_cv_csv(const std::vector<CvResult>& results, std::ostream& os);

}  // namespace vigil
