// vigil: command-line pipeline for EEG vigilance-state classification.
//
//   synth -> features -> train -> predict -> evaluate -> explain, plus cv.
//
// Exit codes: 0 success, 1 computation error, 2 usage or I/O error.

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <thread>

#include "vigil/dataio.hpp"
#include "vigil/errors.hpp"
#include "vigil/eval.hpp"
#include "vigil/explain.hpp"
#include "vigil/features.hpp"
#include "vigil/model_io.hpp"
#include "vigil/textio.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "1.0.0";

struct UsageError : vigil::IoError {
  using vigil::IoError::IoError;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what + " path");
  if (!fs::is_regular_file(path)) {
    throw UsageError(std::string(what) + " '" + path + "' does not exist");
  }
}

void require_parent(const fs::path& out) {
  const auto parent = out.parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw UsageError("output directory '" + parent.string() + "' does not exist");
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw UsageError("cannot create directory '" + dir.string() + "'");
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::function<void(std::ostream&)>& fill) {
  vigil::write_file_atomic(path, fill);
}

void write_manifest(const fs::path& path, const std::string& command, json config,
                    const std::vector<fs::path>& outputs) {
  json m;
  m["tool"] = "vigil";
  m["version"] = kToolVersion;
  m["command"] = command;
  m["created_utc"] = timestamp();
  m["label_map"] = vigil::label_map_text();
  m["formats"] = {{"gbt_model", vigil::kGbtFormatVersion},
                  {"logistic_model", vigil::kLinearFormatVersion},
                  {"mlp_model", vigil::kMlpFormatVersion}};
  m["config"] = std::move(config);
  json outs = json::array();
  for (const auto& o : outputs) outs.push_back(o.string());
  m["outputs"] = outs;
  write_text(path, [&](std::ostream& os) { os << m.dump(2) << '\n'; });
}

fs::path sibling_manifest(const fs::path& out) {
  auto p = out;
  p += ".manifest.json";
  return p;
}

unsigned resolve_threads(unsigned requested) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return requested == 0 ? hw : std::min(requested, hw);
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::size_t per_class = 200;
  std::uint64_t seed = 42;
  std::string params;
  std::string dump_params;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  vigil::SynthConfig cfg;
  if (!a.params.empty()) {
    require_file(a.params, "synthetic parameter file");
    cfg = vigil::synth_config_from(vigil::KeyValueConfig::load(a.params));
  }
  if (a.per_class > 0) cfg.n_per_class = a.per_class;
  cfg.validate();
  if (a.out.empty()) throw UsageError("synth needs --out");
  require_parent(a.out);
  if (!a.dump_params.empty()) require_parent(a.dump_params);

  const auto ds = vigil::synth_dataset(cfg, a.seed);
  vigil::save_dataset_csv(ds, a.out);
  std::vector<fs::path> outs{a.out};
  if (!a.dump_params.empty()) {
    write_text(a.dump_params, [&](std::ostream& os) { os << vigil::synth_config_text(cfg); });
    outs.emplace_back(a.dump_params);
  }
  json c;
  c["seed"] = a.seed;
  c["synth"] = vigil::synth_config_text(cfg);
  write_manifest(sibling_manifest(a.out), "synth", c, outs);
  std::cout << "wrote " << ds.size() << " epochs to " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct FeatureArgs {
  std::string in, out, schema = "compact", taper = "hann", psd_dir;
  double fs = vigil::kDefaultFs;
  std::size_t segment = 1000;
  double overlap = 0.5;
  long mmd_window = 100;
  std::size_t epoch_samples = vigil::kDefaultEpochSamples;
  unsigned threads = 1;
};

int run_features(const FeatureArgs& a) {
  require_file(a.in, "dataset");
  if (a.out.empty()) throw UsageError("features needs --out");
  require_parent(a.out);
  const auto schema = vigil::FeatureSchema::of(vigil::schema_variant_from_string(a.schema));
  vigil::FeatureConfig fc;
  fc.fs = a.fs;
  fc.welch = {a.segment, a.overlap, vigil::taper_from_string(a.taper)};
  fc.mmd_window = a.mmd_window;
  fc.epoch_samples = a.epoch_samples;

  const auto ds = vigil::load_dataset_csv(a.in, a.epoch_samples);
  const auto table = vigil::extract_table(ds, schema, fc, resolve_threads(a.threads));
  vigil::save_feature_csv(table, a.out);

  fs::path qc = a.out;
  qc += ".qc.csv";
  write_text(qc, [&](std::ostream& os) {
    os << "row,flag\n";
    for (std::size_t i = 0; i < table.qc_flags.size(); ++i) {
      for (const auto& f : table.qc_flags[i]) os << i << ',' << f << '\n';
    }
  });
  std::vector<fs::path> outs{a.out, qc};
  if (!a.psd_dir.empty()) {
    ensure_dir(a.psd_dir);
    for (const auto& e : ds.epochs) {
      const auto psd = vigil::welch_psd(e.samples, fc.fs, fc.welch);
      const auto p = fs::path(a.psd_dir) / ("psd_" + std::to_string(e.index) + ".csv");
      write_text(p, [&](std::ostream& os) { vigil::write_psd_csv(psd, os); });
    }
    outs.emplace_back(a.psd_dir);
  }
  json c;
  c["input"] = a.in;
  c["schema"] = a.schema;
  c["schema_id"] = schema.id();
  c["fs"] = a.fs;
  c["welch"] = {{"segment_len", a.segment}, {"overlap", a.overlap}, {"taper", a.taper}};
  c["mmd_window"] = a.mmd_window;
  write_manifest(sibling_manifest(a.out), "features", c, outs);
  std::cout << "wrote " << table.rows() << " x " << schema.size() << " features (" << schema.id()
            << ") to " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string features, out, model = "gbt", log, test_out;
  double test_fraction = 0.0;
  vigil::TrainOptions opts;
  std::optional<double> lr;
  std::uint64_t seed = 42;
};

int run_train(TrainArgs a) {
  require_file(a.features, "feature file");
  if (a.out.empty()) throw UsageError("train needs --out");
  require_parent(a.out);
  if (!a.test_out.empty()) require_parent(a.test_out);
  const auto family = vigil::model_family_from_string(a.model);
  if (a.lr) {
    a.opts.logistic.lr = *a.lr;
    a.opts.mlp.lr = *a.lr;
  }
  a.opts.gbt.seed = a.seed;
  a.opts.mlp.seed = a.seed;
  a.opts.seed = a.seed;
  a.opts.gbt.validate();

  auto table = vigil::load_feature_csv(a.features);
  std::vector<fs::path> outs{a.out};
  if (a.test_fraction > 0.0) {
    if (a.test_out.empty()) throw UsageError("--test-fraction needs --test-out");
    const auto split = vigil::stratified_split(
        table.label_codes(), {1.0 - a.test_fraction, 0.0, a.test_fraction}, a.seed);
    vigil::save_feature_csv(table.subset(split.test), a.test_out);
    outs.emplace_back(a.test_out);
    table = table.subset(split.train);
  }
  auto result = vigil::train_family(family, table, a.opts);
  vigil::save_any_model(result.model, a.out);

  fs::path log_path = a.log.empty() ? fs::path(a.out).concat(".log.csv") : fs::path(a.log);
  if (result.mlp_log) {
    write_text(log_path, [&](std::ostream& os) { vigil::write_train_log_csv(*result.mlp_log, os); });
    outs.push_back(log_path);
  } else if (result.gbt_report) {
    write_text(log_path, [&](std::ostream& os) {
      os << "round,train_loss\n";
      const auto& l = result.gbt_report->train_loss;
      for (std::size_t i = 0; i < l.size(); ++i) os << i << ',' << vigil::format_exact(l[i]) << '\n';
    });
    outs.push_back(log_path);
    for (const auto& w : result.gbt_report->warnings) std::cerr << "warning: " << w << '\n';
  }

  json c;
  c["features"] = a.features;
  c["schema_id"] = table.schema.id();
  c["model"] = a.model;
  c["seed"] = a.seed;
  c["test_fraction"] = a.test_fraction;
  const auto& g = a.opts.gbt;
  c["gbt"] = {{"eta", g.eta},         {"n_rounds", g.n_rounds},
              {"max_depth", g.max_depth}, {"subsample", g.subsample},
              {"colsample", g.colsample}, {"gamma", g.min_split_loss},
              {"lambda", g.l2},       {"min_child_weight", g.min_child_weight}};
  const auto& l = a.opts.logistic;
  c["logistic"] = {{"l2", l.l2}, {"lr", l.lr}, {"max_iter", l.max_iter}, {"tol", l.tol}};
  const auto& m = a.opts.mlp;
  c["mlp"] = {{"hidden", m.hidden}, {"dropout", m.dropout}, {"lr", m.lr},
              {"epochs", m.epochs}, {"batch", m.batch},     {"patience", m.patience},
              {"val_fraction", a.opts.val_fraction}};
  write_manifest(sibling_manifest(a.out), "train", c, outs);

  if (family == vigil::ModelFamily::gbt) {
    std::cout << vigil::model_summary(std::get<vigil::GbtModel>(result.model)) << '\n';
  } else {
    std::cout << a.model << ": " << table.schema.size() << " features, " << table.rows()
              << " training rows, labels " << vigil::label_map_text() << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

vigil::FeatureTable aligned_for(const vigil::AnyModel& model, const vigil::FeatureTable& t) {
  const auto& names = vigil::feature_names_of(model);
  try {
    return vigil::align_features(t, names);
  } catch (const vigil::SchemaError&) {
    throw vigil::SchemaError("schema mismatch: model expects " + vigil::schema_id_of(model) +
                             ", features file has " + t.schema.id());
  }
}

struct PredictArgs {
  std::string model, features, out;
};

int run_predict(const PredictArgs& a) {
  require_file(a.model, "model");
  require_file(a.features, "feature file");
  if (a.out.empty()) throw UsageError("predict needs --out");
  require_parent(a.out);
  const auto model = vigil::load_any_model(a.model);
  const auto table = aligned_for(model, vigil::load_feature_csv(a.features));
  const Eigen::MatrixXd probs = vigil::predict_proba_any(model, table.X);
  write_text(a.out, [&](std::ostream& os) {
    os << "row,label";
    for (auto s : vigil::kAllStates) os << ",p_" << vigil::to_string(s);
    os << ",true_label\n";
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      const int k = vigil::argmax(probs.row(i).transpose());
      os << i << ',' << vigil::to_string(vigil::state_from_code(k));
      for (Eigen::Index c = 0; c < probs.cols(); ++c) os << ',' << vigil::format_exact(probs(i, c));
      os << ',';
      if (const auto& t = table.labels[static_cast<std::size_t>(i)]) os << vigil::to_string(*t);
      os << '\n';
    }
  });
  json c;
  c["model"] = a.model;
  c["features"] = a.features;
  c["schema_id"] = table.schema.id();
  write_manifest(sibling_manifest(a.out), "predict", c, {a.out});
  std::cout << "wrote " << probs.rows() << " predictions to " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct Predictions {
  Eigen::MatrixXd probs;
  std::vector<int> pred;
  std::vector<std::optional<int>> truth;
};

Predictions read_predictions(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw vigil::IoError("cannot open predictions '" + path + "'");
  std::string line;
  std::getline(is, line);
  const auto header = vigil::split(vigil::trim(line), ',');
  const std::size_t k = vigil::kNumStates;
  if (header.size() != k + 3 || header[0] != "row" || header[1] != "label" ||
      header.back() != "true_label") {
    throw vigil::FormatError("predictions header must be row,label,p_<class>...,true_label");
  }
  Predictions p;
  std::vector<double> flat;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    const auto content = vigil::trim(line);
    if (content.empty()) continue;
    ++row;
    const auto cells = vigil::split(content, ',');
    if (cells.size() != k + 3) {
      throw vigil::FormatError("predictions row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " columns");
    }
    p.pred.push_back(vigil::code(vigil::state_from_string(vigil::trim(cells[1]))));
    for (std::size_t c = 0; c < k; ++c) {
      flat.push_back(vigil::parse_double(cells[2 + c], "predictions row " + std::to_string(row)));
    }
    const auto t = vigil::parse_optional_label(vigil::trim(cells.back()));
    p.truth.push_back(t ? std::optional<int>(vigil::code(*t)) : std::nullopt);
  }
  p.probs.resize(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(k));
  for (std::size_t r = 0; r < row; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      p.probs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = flat[r * k + c];
    }
  }
  return p;
}

struct EvaluateArgs {
  std::string predictions, truth, out_dir;
  int bins = 10;
};

int run_evaluate(const EvaluateArgs& a) {
  require_file(a.predictions, "predictions");
  if (!a.truth.empty()) require_file(a.truth, "truth feature file");
  if (a.out_dir.empty()) throw UsageError("evaluate needs --out-dir");
  const auto p = read_predictions(a.predictions);
  std::vector<int> truth;
  if (!a.truth.empty()) {
    truth = vigil::load_feature_csv(a.truth).label_codes();
    if (truth.size() != p.pred.size()) {
      throw vigil::InputError("truth file has " + std::to_string(truth.size()) +
                              " rows, predictions have " + std::to_string(p.pred.size()));
    }
  } else {
    for (std::size_t i = 0; i < p.truth.size(); ++i) {
      if (!p.truth[i]) throw vigil::InputError("prediction row " + std::to_string(i) + " has no true label; pass --truth");
      truth.push_back(*p.truth[i]);
    }
  }
  const auto cm = vigil::confusion(truth, p.pred);
  const auto m = vigil::metrics(cm);
  const auto cal = vigil::reliability(p.probs, truth, a.bins);

  ensure_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  write_text(dir / "metrics.txt", [&](std::ostream& os) {
    vigil::write_metrics_text(m, cm, os);
    os << "brier " << vigil::format_sig(cal.brier, 6) << '\n';
    os << "max_calibration_deviation " << vigil::format_sig(cal.max_deviation, 6) << '\n';
  });
  write_text(dir / "metrics.csv", [&](std::ostream& os) {
    vigil::write_metrics_csv(m, os);
    os << "brier,all," << vigil::format_exact(cal.brier) << '\n';
    os << "max_calibration_deviation,all," << vigil::format_exact(cal.max_deviation) << '\n';
  });
  write_text(dir / "reliability.csv", [&](std::ostream& os) { vigil::write_reliability_csv(cal, os); });
  write_text(dir / "calibration_samples.csv", [&](std::ostream& os) {
    os << "row,confidence,predicted,true,correct\n";
    for (Eigen::Index i = 0; i < p.probs.rows(); ++i) {
      const int k = vigil::argmax(p.probs.row(i).transpose());
      os << i << ',' << vigil::format_exact(p.probs.row(i).maxCoeff()) << ','
         << vigil::to_string(vigil::state_from_code(k)) << ','
         << vigil::to_string(vigil::state_from_code(truth[static_cast<std::size_t>(i)])) << ','
         << (k == truth[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
    }
  });
  json c;
  c["predictions"] = a.predictions;
  c["truth"] = a.truth;
  c["bins"] = a.bins;
  write_manifest(dir / "manifest.json", "evaluate", c,
                 {dir / "metrics.txt", dir / "metrics.csv", dir / "reliability.csv",
                  dir / "calibration_samples.csv"});
  vigil::write_metrics_text(m, cm, std::cout);
  std::cout << "brier " << vigil::format_sig(cal.brier, 6) << ", max calibration deviation "
            << vigil::format_sig(cal.max_deviation, 6) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct ExplainArgs {
  std::string model, features, out_dir;
  long max_rows = -1;
  unsigned threads = 1;
};

int run_explain(const ExplainArgs& a) {
  require_file(a.model, "model");
  require_file(a.features, "feature file");
  if (a.out_dir.empty()) throw UsageError("explain needs --out-dir");
  const auto any = vigil::load_any_model(a.model);
  if (vigil::family_of(any) != vigil::ModelFamily::gbt) {
    throw vigil::CapabilityError("explain supports boosted-tree models only");
  }
  const auto& model = std::get<vigil::GbtModel>(any);
  auto table = aligned_for(any, vigil::load_feature_csv(a.features));
  Eigen::MatrixXd X = table.X;
  if (a.max_rows >= 0 && a.max_rows < X.rows()) X = table.X.topRows(a.max_rows);

  const auto imp = vigil::gain_importance(model);
  const auto summary = vigil::shap_summary(model, X, resolve_threads(a.threads));
  ensure_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  write_text(dir / "importance.csv", [&](std::ostream& os) { vigil::write_importance_csv(imp, os); });
  write_text(dir / "shap.csv", [&](std::ostream& os) { vigil::write_shap_csv(summary, os); });
  write_text(dir / "shap_ranking.csv", [&](std::ostream& os) {
    vigil::write_shap_ranking_csv(summary, model.feature_names, os);
  });
  json c;
  c["model"] = a.model;
  c["features"] = a.features;
  c["rows"] = X.rows();
  write_manifest(dir / "manifest.json", "explain", c,
                 {dir / "importance.csv", dir / "shap.csv", dir / "shap_ranking.csv"});
  if (imp.no_splits) std::cerr << "warning: model has no splits; importance shares are zero\n";
  std::cout << "top features by mean |phi|:";
  for (std::size_t i = 0; i < std::min<std::size_t>(5, summary.ranking.size()); ++i) {
    std::cout << ' ' << summary.ranking[i];
  }
  std::cout << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct CvArgs {
  std::string features, out, model = "gbt", grid;
  int folds = 5;
  std::uint64_t seed = 42;
};

int run_cv(const CvArgs& a) {
  require_file(a.features, "feature file");
  if (a.out.empty()) throw UsageError("cv needs --out");
  require_parent(a.out);
  const auto family = vigil::model_family_from_string(a.model);
  const auto grid = vigil::parse_grid(a.grid, a.folds, a.seed);
  const auto table = vigil::load_feature_csv(a.features);
  vigil::TrainOptions base;
  base.seed = a.seed;
  base.gbt.seed = a.seed;
  base.mlp.seed = a.seed;
  const auto results = vigil::cross_validate(table, grid, family, base);
  write_text(a.out, [&](std::ostream& os) { vigil::write_cv_csv(results, os); });
  json c;
  c["features"] = a.features;
  c["model"] = a.model;
  c["grid"] = a.grid;
  c["folds"] = a.folds;
  c["seed"] = a.seed;
  write_manifest(sibling_manifest(a.out), "cv", c, {a.out});
  std::ifstream back(a.out);
  std::cout << back.rdbuf();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vigil: EEG vigilance-state classification pipeline"};
  app.set_config("--config", "", "flat key = value file supplying option values");
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "worker cap (0 = all cores); results do not depend on it");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a seeded synthetic EEG dataset");
  s->add_option("--per-class", synth.per_class, "epochs per class");
  s->add_option("--seed", synth.seed, "PRNG seed");
  s->add_option("--params", synth.params, "synthetic parameter file (key = value)");
  s->add_option("--dump-params", synth.dump_params, "write the resolved parameters here");
  s->add_option("--out", synth.out, "dataset CSV to write")->required();

  FeatureArgs feat;
  auto* f = app.add_subcommand("features", "extract a feature matrix from an epoch CSV");
  f->add_option("--in", feat.in, "epoch CSV")->required();
  f->add_option("--out", feat.out, "feature CSV to write")->required();
  f->add_option("--schema", feat.schema, "compact | extended | raw_plus_compact");
  f->add_option("--fs", feat.fs, "sampling rate in Hz");
  f->add_option("--epoch-samples", feat.epoch_samples, "samples per epoch");
  f->add_option("--welch-segment", feat.segment, "Welch segment length in samples");
  f->add_option("--welch-overlap", feat.overlap, "Welch segment overlap fraction");
  f->add_option("--taper", feat.taper, "hann | hamming | rectangular");
  f->add_option("--mmd-window", feat.mmd_window, "MMD window length in samples");
  f->add_option("--psd-dir", feat.psd_dir, "also dump one PSD CSV per epoch here");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train a classifier on a feature CSV");
  t->add_option("--features", train.features, "feature CSV")->required();
  t->add_option("--model", train.model, "gbt | logistic | mlp");
  t->add_option("--out", train.out, "model file to write")->required();
  t->add_option("--log", train.log, "training log CSV (default <out>.log.csv)");
  t->add_option("--seed", train.seed, "PRNG seed");
  t->add_option("--test-fraction", train.test_fraction, "hold out this stratified share");
  t->add_option("--test-out", train.test_out, "feature CSV for the held-out rows");
  t->add_option("--eta", train.opts.gbt.eta, "gbt learning rate");
  t->add_option("--rounds", train.opts.gbt.n_rounds, "gbt boosting rounds");
  t->add_option("--max-depth", train.opts.gbt.max_depth, "gbt tree depth");
  t->add_option("--subsample", train.opts.gbt.subsample, "gbt row fraction per tree");
  t->add_option("--colsample", train.opts.gbt.colsample, "gbt feature fraction per tree");
  t->add_option("--gamma", train.opts.gbt.min_split_loss, "gbt minimum split gain");
  t->add_option("--lambda", train.opts.gbt.l2, "gbt leaf L2 regularization");
  t->add_option("--min-child-weight", train.opts.gbt.min_child_weight, "gbt hessian floor");
  t->add_option("--l2", train.opts.logistic.l2, "logistic L2 strength");
  t->add_option("--max-iter", train.opts.logistic.max_iter, "logistic iterations");
  t->add_option("--tol", train.opts.logistic.tol, "logistic gradient tolerance");
  t->add_option("--lr", train.lr, "learning rate (logistic default 0.1, mlp default 0.001)");
  t->add_option("--epochs", train.opts.mlp.epochs, "mlp epochs");
  t->add_option("--batch", train.opts.mlp.batch, "mlp batch size");
  t->add_option("--dropout", train.opts.mlp.dropout, "mlp dropout rate");
  t->add_option("--patience", train.opts.mlp.patience, "mlp early-stopping patience");
  t->add_option("--val-fraction", train.opts.val_fraction, "mlp validation share");

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "predict labels and class probabilities");
  p->add_option("--model", pred.model, "model file")->required();
  p->add_option("--features", pred.features, "feature CSV")->required();
  p->add_option("--out", pred.out, "predictions CSV to write")->required();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "metrics and calibration for predictions");
  e->add_option("--predictions", ev.predictions, "predictions CSV")->required();
  e->add_option("--truth", ev.truth, "feature CSV with labels (default: true_label column)");
  e->add_option("--out-dir", ev.out_dir, "directory for reports")->required();
  e->add_option("--bins", ev.bins, "reliability bins");

  ExplainArgs ex;
  auto* x = app.add_subcommand("explain", "gain importance and TreeSHAP tables");
  x->add_option("--model", ex.model, "gbt model file")->required();
  x->add_option("--features", ex.features, "feature CSV")->required();
  x->add_option("--out-dir", ex.out_dir, "directory for tables")->required();
  x->add_option("--max-rows", ex.max_rows, "explain only the first N rows");

  CvArgs cv;
  auto* c = app.add_subcommand("cv", "stratified k-fold grid search");
  c->add_option("--features", cv.features, "feature CSV")->required();
  c->add_option("--model", cv.model, "gbt | logistic | mlp");
  c->add_option("--grid", cv.grid, "e.g. \"eta=0.01,0.1;n_rounds=5\"")->required();
  c->add_option("--folds", cv.folds, "fold count");
  c->add_option("--seed", cv.seed, "PRNG seed");
  c->add_option("--out", cv.out, "ranked results CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : 2;
  }

  feat.threads = threads;
  ex.threads = threads;
  try {
    if (*s) return run_synth(synth);
    if (*f) return run_features(feat);
    if (*t) return run_train(train);
    if (*p) return run_predict(pred);
    if (*e) return run_evaluate(ev);
    if (*x) return run_explain(ex);
    if (*c) return run_cv(cv);
  } catch (const vigil::IoError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 2;
}
