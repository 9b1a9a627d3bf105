#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vigil/baselines.hpp"
#include "vigil/features.hpp"
#include "vigil/gbt.hpp"

namespace vigil {

enum class ModelFamily { gbt, logistic, mlp };

std::string to_string(ModelFamily f);
ModelFamily model_family_from_string(const std::string& name);

using AnyModel = std::variant<GbtModel, LinearModel, MlpModel>;

ModelFamily family_of(const AnyModel& m);
const std::string& schema_id_of(const AnyModel& m);
const std::vector<std::string>& feature_names_of(const AnyModel& m);

/// Class probabilities for raw (unstandardized) feature rows, n × K. Linear and
/// MLP models apply their embedded standardizer first.
Eigen::MatrixXd predict_proba_any(const AnyModel& m, const Eigen::Ref<const Eigen::MatrixXd>& X);

void save_any_model(const AnyModel& m, const std::filesystem::path& path);
/// Dispatches on the `vigil-model <kind>` header line.
AnyModel load_any_model(const std::filesystem::path& path);
AnyModel read_any_model(std::istream& is);

/// Named hyperparameter overrides, e.g. {"eta", 0.1}.
using HyperParams = std::map<std::string, double>;

void apply_params(GbtConfig& c, const HyperParams& p);
void apply_params(LogisticConfig& c, const HyperParams& p);
void apply_params(MlpConfig& c, const HyperParams& p);

struct TrainOptions {
  GbtConfig gbt;
  LogisticConfig logistic;
  MlpConfig mlp;
  double val_fraction = 0.15;  // MLP only: share of the training rows held out
  std::uint64_t seed = 42;     // validation split
};

struct TrainResult {
  AnyModel model;
  std::optional<TrainLog> mlp_log;
  std::optional<GbtTrainReport> gbt_report;
};

/// Trains one family on raw feature rows. Logistic and MLP fit a standardizer
/// on the training rows (the MLP on its non-validation part) and embed it;
/// trees consume raw values.
TrainResult train_family(ModelFamily family, const FeatureTable& train, const TrainOptions& opts);

}  // namespace vigil
