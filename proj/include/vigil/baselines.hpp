#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vigil/features.hpp"
#include "vigil/labels.hpp"

namespace vigil {

// ---------------------------------------------------------------------------
// Multinomial logistic regression
// ---------------------------------------------------------------------------

struct LogisticConfig {
  double l2 = 1e-3;
  double lr = 0.1;
  int max_iter = 5000;
  double tol = 1e-6;  // stop when the gradient ∞-norm drops below
  int n_classes = kNumStates;
};

struct LinearModel {
  Eigen::MatrixXd weights;  // K × D
  Eigen::VectorXd bias;     // K
  double l2 = 0.0;
  int iterations = 0;
  std::vector<std::string> feature_names;
  std::string schema_id;
  std::optional<Standardizer> scaler;  // applied to raw inputs before scoring

  Eigen::Index n_features() const { return weights.cols(); }
  int n_classes() const { return static_cast<int>(weights.rows()); }
};

/// Mean cross-entropy + (l2/2)·||W||² (bias unpenalized), with its gradient.
double logistic_loss_grad(const Eigen::Ref<const Eigen::MatrixXd>& weights,
                          const Eigen::Ref<const Eigen::VectorXd>& bias,
                          const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> y,
                          double l2, Eigen::MatrixXd* grad_w = nullptr,
                          Eigen::VectorXd* grad_b = nullptr);

/// Full-batch gradient descent from zero weights. Expects standardized inputs.
LinearModel train_logistic(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> y,
                           const LogisticConfig& config = {});

/// Class probabilities for already-standardized inputs, n × K.
Eigen::MatrixXd logistic_predict_rows(const LinearModel& model,
                                      const Eigen::Ref<const Eigen::MatrixXd>& X);
Eigen::VectorXd logistic_predict(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

// ---------------------------------------------------------------------------
// Multilayer perceptron
// ---------------------------------------------------------------------------

struct MlpConfig {
  std::vector<int> hidden = {128, 64};
  double dropout = 0.3;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs = 100;
  int batch = 32;
  int patience = 10;
  std::uint64_t seed = 42;
  int n_classes = kNumStates;
};

struct DenseLayer {
  Eigen::MatrixXd W;  // out × in
  Eigen::VectorXd b;  // out
};

struct MlpModel {
  std::vector<DenseLayer> layers;  // ReLU after all but the last
  double dropout = 0.0;
  std::vector<std::string> feature_names;
  std::string schema_id;
  std::optional<Standardizer> scaler;

  Eigen::Index n_features() const { return layers.empty() ? 0 : layers.front().W.cols(); }
  int n_classes() const { return layers.empty() ? 0 : static_cast<int>(layers.back().W.rows()); }
  std::vector<int> layer_sizes() const;
};

struct TrainLog {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_acc;
  int best_epoch = -1;     // 0-based epoch whose weights were restored
  int stopped_epoch = -1;  // last epoch run
};

/// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
MlpModel init_mlp(int n_inputs, const MlpConfig& config);

/// Mean sparse cross-entropy of a batch and its gradients, one entry per
/// layer. `masks` (one per hidden layer, already scaled by 1/(1-p)) enable
/// dropout; nullptr runs the deterministic forward pass.
struct MlpGradients {
  double loss = 0.0;
  std::vector<DenseLayer> grads;
};
MlpGradients mlp_loss_grad(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X,
                           std::span<const int> y,
                           const std::vector<Eigen::MatrixXd>* masks = nullptr);

/// Adam on shuffled mini-batches with inverted dropout; early stopping on
/// validation loss restores the best weights seen.
std::pair<MlpModel, TrainLog> train_mlp(const Eigen::Ref<const Eigen::MatrixXd>& X_train,
                                        std::span<const int> y_train,
                                        const Eigen::Ref<const Eigen::MatrixXd>& X_val,
                                        std::span<const int> y_val, const MlpConfig& config = {});

/// Probabilities for already-standardized inputs (no dropout).
Eigen::MatrixXd mlp_predict_rows(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X);
Eigen::VectorXd mlp_predict(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Row-wise softmax of an n × K matrix.
Eigen::MatrixXd softmax_rows(const Eigen::Ref<const Eigen::MatrixXd>& logits);

// ---------------------------------------------------------------------------
// Serialization (same family as the boosted-tree format)
// ---------------------------------------------------------------------------

inline constexpr int kLinearFormatVersion = 1;
inline constexpr int kMlpFormatVersion = 1;

void write_linear_model(const LinearModel& m, std::ostream& os);
LinearModel read_linear_model(std::istream& is);
void write_mlp_model(const MlpModel& m, std::ostream& os);
MlpModel read_mlp_model(std::istream& is);

/// `epoch,train_loss,val_loss,val_acc`
void write_train_log_csv(const TrainLog& log, std::ostream& os);

}  // namespace vigil
