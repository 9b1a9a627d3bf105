#include "vigil/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "vigil/dataio.hpp"
#include "vigil/errors.hpp"
#include "vigil/textio.hpp"

namespace vigil {

std::string to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::gbt:
      return "gbt";
    case ModelFamily::logistic:
      return "logistic";
    case ModelFamily::mlp:
      return "mlp";
  }
  return "?";
}

ModelFamily model_family_from_string(const std::string& name) {
  if (name == "gbt") return ModelFamily::gbt;
  if (name == "logistic") return ModelFamily::logistic;
  if (name == "mlp") return ModelFamily::mlp;
  throw ConfigError("unknown model family '" + name + "' (expected gbt, logistic or mlp)");
}

ModelFamily family_of(const AnyModel& m) { return static_cast<ModelFamily>(m.index()); }

const std::string& schema_id_of(const AnyModel& m) {
  return std::visit([](const auto& x) -> const std::string& { return x.schema_id; }, m);
}

const std::vector<std::string>& feature_names_of(const AnyModel& m) {
  return std::visit(
      [](const auto& x) -> const std::vector<std::string>& { return x.feature_names; }, m);
}

namespace {

Eigen::MatrixXd scaled(const std::optional<Standardizer>& s,
                       const Eigen::Ref<const Eigen::MatrixXd>& X) {
  return s ? standardize_rows(*s, X) : Eigen::MatrixXd(X);
}

}  // namespace

Eigen::MatrixXd predict_proba_any(const AnyModel& m, const Eigen::Ref<const Eigen::MatrixXd>& X) {
  switch (family_of(m)) {
    case ModelFamily::gbt:
      return predict_proba_rows(std::get<GbtModel>(m), X);
    case ModelFamily::logistic: {
      const auto& lm = std::get<LinearModel>(m);
      return logistic_predict_rows(lm, scaled(lm.scaler, X));
    }
    case ModelFamily::mlp: {
      const auto& mm = std::get<MlpModel>(m);
      return mlp_predict_rows(mm, scaled(mm.scaler, X));
    }
  }
  throw Error("unreachable model family");
}

void save_any_model(const AnyModel& m, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& os) {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, GbtModel>) write_gbt_model(x, os);
          else if constexpr (std::is_same_v<T, LinearModel>) write_linear_model(x, os);
          else write_mlp_model(x, os);
        },
        m);
  });
}

AnyModel read_any_model(std::istream& is) {
  std::string first;
  const auto start = is.tellg();
  std::getline(is, first);
  std::istringstream ss(first);
  std::string magic, kind;
  ss >> magic >> kind;
  if (magic != "vigil-model") throw ParseError("not a vigil model file");
  is.clear();
  is.seekg(start);
  if (kind == "gbt") return read_gbt_model(is);
  if (kind == "logistic") return read_linear_model(is);
  if (kind == "mlp") return read_mlp_model(is);
  throw ParseError("unknown model kind '" + kind + "'");
}

AnyModel load_any_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open model '" + path.string() + "'");
  return read_any_model(is);
}

namespace {

[[noreturn]] void unknown_param(const std::string& family, const std::string& key) {
  throw ConfigError("unknown " + family + " hyperparameter '" + key + "'");
}

int as_int(const std::string& key, double v) {
  if (v != std::floor(v)) throw ConfigError("hyperparameter '" + key + "' must be an integer");
  return static_cast<int>(v);
}

}  // namespace

void apply_params(GbtConfig& c, const HyperParams& p) {
  for (const auto& [k, v] : p) {
    if (k == "eta") c.eta = v;
    else if (k == "n_rounds" || k == "rounds") c.n_rounds = as_int(k, v);
    else if (k == "max_depth") c.max_depth = as_int(k, v);
    else if (k == "subsample") c.subsample = v;
    else if (k == "colsample") c.colsample = v;
    else if (k == "min_split_loss" || k == "gamma") c.min_split_loss = v;
    else if (k == "l2" || k == "lambda") c.l2 = v;
    else if (k == "min_child_weight") c.min_child_weight = v;
    else if (k == "seed") c.seed = static_cast<std::uint64_t>(as_int(k, v));
    else unknown_param("gbt", k);
  }
  c.validate();
}

void apply_params(LogisticConfig& c, const HyperParams& p) {
  for (const auto& [k, v] : p) {
    if (k == "l2") c.l2 = v;
    else if (k == "lr") c.lr = v;
    else if (k == "max_iter") c.max_iter = as_int(k, v);
    else if (k == "tol") c.tol = v;
    else unknown_param("logistic", k);
  }
}

void apply_params(MlpConfig& c, const HyperParams& p) {
  for (const auto& [k, v] : p) {
    if (k == "lr") c.lr = v;
    else if (k == "dropout") c.dropout = v;
    else if (k == "batch") c.batch = as_int(k, v);
    else if (k == "epochs") c.epochs = as_int(k, v);
    else if (k == "patience") c.patience = as_int(k, v);
    else if (k == "hidden1") c.hidden.at(0) = as_int(k, v);
    else if (k == "hidden2") c.hidden.at(1) = as_int(k, v);
    else if (k == "seed") c.seed = static_cast<std::uint64_t>(as_int(k, v));
    else unknown_param("mlp", k);
  }
}

TrainResult train_family(ModelFamily family, const FeatureTable& train, const TrainOptions& opts) {
  const auto y = train.label_codes();
  const auto& names = train.schema.names();
  const auto& id = train.schema.id();
  switch (family) {
    case ModelFamily::gbt: {
      GbtTrainReport report;
      auto m = train_gbt(train.X, y, opts.gbt, names, id, &report);
      return {AnyModel(std::move(m)), std::nullopt, std::move(report)};
    }
    case ModelFamily::logistic: {
      auto scaler = fit_standardizer(train.X, id);
      auto m = train_logistic(standardize_rows(scaler, train.X), y, opts.logistic);
      m.feature_names = names;
      m.schema_id = id;
      m.scaler = std::move(scaler);
      return {AnyModel(std::move(m)), std::nullopt, std::nullopt};
    }
    case ModelFamily::mlp: {
      const double v = opts.val_fraction;
      if (!(v > 0.0 && v < 1.0)) throw ConfigError("validation fraction must be in (0, 1)");
      const auto split = stratified_split(y, SplitFractions{1.0 - v, 0.0, v}, opts.seed);
      const auto tr = train.subset(split.train);
      const auto va = train.subset(split.test);
      auto scaler = fit_standardizer(tr.X, id);
      auto [m, log] = train_mlp(standardize_rows(scaler, tr.X), tr.label_codes(),
                                standardize_rows(scaler, va.X), va.label_codes(), opts.mlp);
      m.feature_names = names;
      m.schema_id = id;
      m.scaler = std::move(scaler);
      return {AnyModel(std::move(m)), std::move(log), std::nullopt};
    }
  }
  throw Error("unreachable model family");
}

}  // namespace vigil
