#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vigil/labels.hpp"

namespace vigil {

/// Gradient-boosting hyperparameters. eta, rounds, subsample, colsample,
/// min_split_loss, l2 and seed default to the published configuration;
/// max_depth and min_child_weight use the customary library defaults.
struct GbtConfig {
  double eta = 0.1;
  int n_rounds = 500;
  int max_depth = 6;
  double subsample = 0.8;
  double colsample = 0.8;
  double min_split_loss = 0.0;  // gamma
  double l2 = 1.0;              // lambda
  double min_child_weight = 1.0;
  std::uint64_t seed = 42;
  int n_classes = kNumStates;

  void validate() const;
  bool operator==(const GbtConfig&) const = default;
};

/// Flat node: internal when `left >= 0`. Rows with x[feature] < threshold go
/// left. `gain` and `cover` (training rows reaching the node) are kept for
/// importance and TreeSHAP.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  bool default_left = true;  // reserved; missing values are rejected
  double weight = 0.0;       // leaf weight before eta scaling
  double gain = 0.0;
  double cover = 0.0;

  bool is_leaf() const { return left < 0; }
};

struct Tree {
  int round = 0;
  int cls = 0;
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  /// Index of the leaf reached by x.
  int leaf_index(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  double leaf_weight(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return nodes[static_cast<std::size_t>(leaf_index(x))].weight;
  }
  int depth() const;
};

struct GbtModel {
  GbtConfig config;
  Eigen::VectorXd base_score;  // per-class initial margin
  std::vector<Tree> trees;     // round-major, class-minor
  std::vector<std::string> feature_names;
  std::string schema_id;
  bool has_cover = true;

  int n_classes() const { return config.n_classes; }
  Eigen::Index n_features() const { return static_cast<Eigen::Index>(feature_names.size()); }
  int rounds() const { return n_classes() ? static_cast<int>(trees.size()) / n_classes() : 0; }
};

/// Max-subtracted softmax.
Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);

struct GradHess {
  Eigen::VectorXd g;
  Eigen::VectorXd h;
};

/// Softmax cross-entropy derivatives w.r.t. the logits:
/// g_k = p_k - [k == y], h_k = p_k (1 - p_k).
GradHess grad_hess_softmax(const Eigen::Ref<const Eigen::VectorXd>& probs, int true_class);

/// One row of a sorted feature column.
struct ColumnEntry {
  double value = 0.0;
  double g = 0.0;
  double h = 0.0;
};

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  double g_left = 0.0, h_left = 0.0;
  double g_right = 0.0, h_right = 0.0;
};

/// Second-order split gain, already net of the min_split_loss penalty.
double split_gain(double g_left, double h_left, double g_right, double h_right,
                  double l2, double min_split_loss);

/// Best threshold on one column sorted by value. Candidates are midpoints of
/// consecutive distinct values; the result must have gain > 0 and both
/// children with hessian sum >= min_child_weight. Ties keep the lowest
/// threshold.
std::optional<SplitCandidate> find_best_split(std::span<const ColumnEntry> sorted_column,
                                              int feature, const GbtConfig& config);

/// Best split over `features` for the node holding `rows`. Ties keep the
/// lowest feature index, then the lowest threshold.
std::optional<SplitCandidate> find_best_node_split(
    const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> rows,
    std::span<const double> g, std::span<const double> h, std::span<const int> features,
    const GbtConfig& config);

struct GbtTrainReport {
  std::vector<double> train_loss;  // mean log-loss after each round
  Eigen::MatrixXd margins;         // final training margins, n × K
  std::vector<std::string> warnings;
};

/// Softmax boosting with exact greedy trees. Per round the probabilities are
/// computed once, then one tree per class is grown on a seeded row subsample
/// and column subsample; leaf weight = -G / (H + l2); margins += eta * leaf.
GbtModel train_gbt(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> y,
                   const GbtConfig& config, std::vector<std::string> feature_names = {},
                   std::string schema_id = {}, GbtTrainReport* report = nullptr);

Eigen::VectorXd predict_margin(const GbtModel& model,
                               const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd predict_proba(const GbtModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
VigilanceState predict_label(const GbtModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Row-wise predictions, n × K.
Eigen::MatrixXd predict_margin_rows(const GbtModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X);
Eigen::MatrixXd predict_proba_rows(const GbtModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X);

/// Argmax with lowest-index tie-break.
int argmax(const Eigen::Ref<const Eigen::VectorXd>& v);

/// Mean softmax log-loss of margins against labels.
double softmax_log_loss(const Eigen::Ref<const Eigen::MatrixXd>& margins, std::span<const int> y);

inline constexpr int kGbtFormatVersion = 1;

void write_gbt_model(const GbtModel& model, std::ostream& os);
GbtModel read_gbt_model(std::istream& is);
void save_model(const GbtModel& model, const std::filesystem::path& path);
GbtModel load_gbt_model(const std::filesystem::path& path);

/// "gbt: 500 rounds x 3 classes, depth <= 6, 9 features, labels Wake=0 ..."
std::string model_summary(const GbtModel& model);

}  // namespace vigil
