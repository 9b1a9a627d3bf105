#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "vigil/gbt.hpp"

namespace vigil {

struct GainImportance {
  std::vector<std::string> features;
  Eigen::VectorXd total_gain;
  Eigen::VectorXd share;  // sums to 1 when any split exists
  bool no_splits = false;
};

/// Sums the recorded gain of every internal node per feature.
GainImportance gain_importance(const GbtModel& model);

/// `feature,total_gain,share`, in schema order.
void write_importance_csv(const GainImportance& imp, std::ostream& os);

/// Margin-space attributions: base[k] + Σ_j phi(j, k) = margin[k].
struct ShapValues {
  Eigen::VectorXd base;  // K
  Eigen::MatrixXd phi;   // D × K
};

/// Expected margin of one tree under the training cover distribution.
double tree_expected_value(const Tree& tree);

/// Path-dependent TreeSHAP contribution of one tree, added into `phi`
/// (length D) with the tree's leaf values scaled by `scale`.
void tree_shap_accumulate(const Tree& tree, const Eigen::Ref<const Eigen::VectorXd>& x,
                          double scale, Eigen::Ref<Eigen::VectorXd> phi);

/// Exact Shapley values of the ensemble margins. Throws CapabilityError when
/// the model carries no cover counts.
ShapValues tree_shap(const GbtModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

struct ShapRow {
  std::size_t row = 0;
  std::string feature;
  double value = 0.0;
  VigilanceState cls = VigilanceState::Wake;
  double phi = 0.0;
};

struct ShapSummary {
  std::vector<ShapRow> rows;        // row-major, then feature, then class
  std::vector<std::string> ranking;  // by mean |phi| over rows and classes
  Eigen::VectorXd mean_abs;          // schema order
  Eigen::VectorXd base;
};

/// Long-form table for beeswarm plots; row-parallel, output ordered by row.
ShapSummary shap_summary(const GbtModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X,
                         unsigned threads = 1);

/// `row,feature,feature_value,class,phi`
void write_shap_csv(const ShapSummary& s, std::ostream& os);
/// `rank,feature,mean_abs_phi`
void write_shap_ranking_csv(const ShapSummary& s, const std::vector<std::string>& names,
                            std::ostream& os);

}  // namespace vigil
