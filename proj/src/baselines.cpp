#include "vigil/baselines.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "model_text.hpp"
#include "vigil/errors.hpp"
#include "vigil/rng.hpp"
#include "vigil/textio.hpp"

namespace vigil {

Eigen::MatrixXd softmax_rows(const Eigen::Ref<const Eigen::MatrixXd>& logits) {
  Eigen::MatrixXd p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

namespace {

void check_labels(std::span<const int> y, Eigen::Index rows, int k) {
  if (static_cast<Eigen::Index>(y.size()) != rows) {
    throw InputError("feature rows (" + std::to_string(rows) + ") and labels (" +
                     std::to_string(y.size()) + ") differ");
  }
  for (int label : y) {
    if (label < 0 || label >= k) throw InputError("label " + std::to_string(label) + " out of range");
  }
}

// Mean cross-entropy of logits, plus (P - Y) / n when `delta` is given.
double cross_entropy(const Eigen::Ref<const Eigen::MatrixXd>& logits, std::span<const int> y,
                     Eigen::MatrixXd* delta) {
  const Eigen::Index n = logits.rows();
  const Eigen::VectorXd m = logits.rowwise().maxCoeff();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lse = m[i] + std::log((logits.row(i).array() - m[i]).exp().sum());
    loss += lse - logits(i, y[static_cast<std::size_t>(i)]);
  }
  if (delta) {
    *delta = softmax_rows(logits);
    for (Eigen::Index i = 0; i < n; ++i) (*delta)(i, y[static_cast<std::size_t>(i)]) -= 1.0;
    *delta /= static_cast<double>(n);
  }
  return loss / static_cast<double>(n);
}

}  // namespace

double logistic_loss_grad(const Eigen::Ref<const Eigen::MatrixXd>& weights,
                          const Eigen::Ref<const Eigen::VectorXd>& bias,
                          const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> y,
                          double l2, Eigen::MatrixXd* grad_w, Eigen::VectorXd* grad_b) {
  const Eigen::MatrixXd logits = (X * weights.transpose()).rowwise() + bias.transpose();
  Eigen::MatrixXd delta;
  const bool want_grad = grad_w || grad_b;
  double loss = cross_entropy(logits, y, want_grad ? &delta : nullptr);
  loss += 0.5 * l2 * weights.squaredNorm();
  if (grad_w) *grad_w = delta.transpose() * X + l2 * weights;
  if (grad_b) *grad_b = delta.colwise().sum().transpose();
  return loss;
}

LinearModel train_logistic(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> y,
                           const LogisticConfig& config) {
  if (!(config.lr > 0.0) || config.max_iter < 0 || !(config.l2 >= 0.0)) {
    throw ConfigError("logistic regression needs lr > 0, l2 >= 0, max_iter >= 0");
  }
  if (X.rows() == 0) throw InputError("training set is empty");
  check_labels(y, X.rows(), config.n_classes);
  if (!X.allFinite()) throw InputError("training features contain NaN or Inf");

  LinearModel m;
  m.weights = Eigen::MatrixXd::Zero(config.n_classes, X.cols());
  m.bias = Eigen::VectorXd::Zero(config.n_classes);
  m.l2 = config.l2;
  Eigen::MatrixXd gw;
  Eigen::VectorXd gb;
  int it = 0;
  for (; it < config.max_iter; ++it) {
    const double loss = logistic_loss_grad(m.weights, m.bias, X, y, config.l2, &gw, &gb);
    if (!std::isfinite(loss)) {
      throw DivergenceError("logistic loss became non-finite at iteration " + std::to_string(it) +
                            "; try a smaller learning rate");
    }
    const double gmax = std::max(gw.cwiseAbs().maxCoeff(), gb.cwiseAbs().maxCoeff());
    if (gmax < config.tol) break;
    m.weights -= config.lr * gw;
    m.bias -= config.lr * gb;
  }
  m.iterations = it;
  return m;
}

Eigen::MatrixXd logistic_predict_rows(const LinearModel& model,
                                      const Eigen::Ref<const Eigen::MatrixXd>& X) {
  if (X.cols() != model.n_features()) {
    throw SchemaError("input has " + std::to_string(X.cols()) + " features, model " +
                      model.schema_id + " expects " + std::to_string(model.n_features()));
  }
  return softmax_rows((X * model.weights.transpose()).rowwise() + model.bias.transpose());
}

Eigen::VectorXd logistic_predict(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return logistic_predict_rows(model, Eigen::MatrixXd(x.transpose())).row(0).transpose();
}

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

std::vector<int> MlpModel::layer_sizes() const {
  std::vector<int> s;
  if (layers.empty()) return s;
  s.push_back(static_cast<int>(layers.front().W.cols()));
  for (const auto& l : layers) s.push_back(static_cast<int>(l.W.rows()));
  return s;
}

MlpModel init_mlp(int n_inputs, const MlpConfig& config) {
  if (n_inputs <= 0) throw ConfigError("MLP needs at least one input");
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  MlpModel m;
  m.dropout = config.dropout;
  Pcg32 rng(derive_seed(config.seed, 0x1417));
  std::vector<int> sizes{n_inputs};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(config.n_classes);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    if (sizes[l + 1] <= 0) throw ConfigError("layer sizes must be positive");
    DenseLayer layer;
    const bool output = l + 2 == sizes.size();
    const double limit = output ? std::sqrt(6.0 / (sizes[l] + sizes[l + 1]))
                                : std::sqrt(6.0 / sizes[l]);
    layer.W.resize(sizes[l + 1], sizes[l]);
    for (Eigen::Index i = 0; i < layer.W.size(); ++i) layer.W(i) = rng.uniform(-limit, limit);
    layer.b = Eigen::VectorXd::Zero(sizes[l + 1]);
    m.layers.push_back(std::move(layer));
  }
  return m;
}

namespace {

// Forward pass keeping pre-activations (Z) and activations (A, A[0] = X).
struct Forward {
  std::vector<Eigen::MatrixXd> Z;
  std::vector<Eigen::MatrixXd> A;
};

Forward forward(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X,
                const std::vector<Eigen::MatrixXd>* masks) {
  Forward f;
  f.A.emplace_back(X);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    f.Z.push_back((f.A.back() * layer.W.transpose()).rowwise() + layer.b.transpose());
    if (l + 1 < model.layers.size()) {
      Eigen::MatrixXd a = f.Z.back().cwiseMax(0.0);
      if (masks) a.array() *= (*masks)[l].array();
      f.A.push_back(std::move(a));
    }
  }
  return f;
}

}  // namespace

MlpGradients mlp_loss_grad(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X,
                           std::span<const int> y, const std::vector<Eigen::MatrixXd>* masks) {
  check_labels(y, X.rows(), model.n_classes());
  const auto f = forward(model, X, masks);
  Eigen::MatrixXd delta;
  MlpGradients out;
  out.loss = cross_entropy(f.Z.back(), y, &delta);
  out.grads.resize(model.layers.size());
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    out.grads[l].W = delta.transpose() * f.A[l];
    out.grads[l].b = delta.colwise().sum().transpose();
    if (l == 0) break;
    Eigen::MatrixXd back = delta * model.layers[l].W;
    if (masks) back.array() *= (*masks)[l - 1].array();
    delta = back.array() * (f.Z[l - 1].array() > 0.0).cast<double>();
  }
  return out;
}

Eigen::MatrixXd mlp_predict_rows(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X) {
  if (X.cols() != model.n_features()) {
    throw SchemaError("input has " + std::to_string(X.cols()) + " features, model " +
                      model.schema_id + " expects " + std::to_string(model.n_features()));
  }
  return softmax_rows(forward(model, X, nullptr).Z.back());
}

Eigen::VectorXd mlp_predict(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return mlp_predict_rows(model, Eigen::MatrixXd(x.transpose())).row(0).transpose();
}

std::pair<MlpModel, TrainLog> train_mlp(const Eigen::Ref<const Eigen::MatrixXd>& X_train,
                                        std::span<const int> y_train,
                                        const Eigen::Ref<const Eigen::MatrixXd>& X_val,
                                        std::span<const int> y_val, const MlpConfig& config) {
  if (config.epochs < 0 || config.batch <= 0 || config.patience < 0 || !(config.lr > 0.0)) {
    throw ConfigError("MLP needs epochs >= 0, batch > 0, patience >= 0, lr > 0");
  }
  if (X_train.rows() == 0) throw InputError("training set is empty");
  if (X_val.rows() == 0) throw InputError("validation set is empty");
  if (X_val.cols() != X_train.cols()) throw SchemaError("validation width differs from training");
  check_labels(y_train, X_train.rows(), config.n_classes);
  check_labels(y_val, X_val.rows(), config.n_classes);
  if (!X_train.allFinite() || !X_val.allFinite()) throw InputError("features contain NaN or Inf");

  MlpModel model = init_mlp(static_cast<int>(X_train.cols()), config);
  std::vector<DenseLayer> m1, m2;
  for (const auto& l : model.layers) {
    m1.push_back({Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()), Eigen::VectorXd::Zero(l.b.size())});
  }
  m2 = m1;

  TrainLog log;
  MlpModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  int wait = 0;
  long long step = 0;
  const Eigen::Index n = X_train.rows();
  const double keep = 1.0 - config.dropout;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Pcg32 rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch), 7));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);

    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += config.batch) {
      const Eigen::Index bs = std::min<Eigen::Index>(config.batch, n - start);
      Eigen::MatrixXd Xb(bs, X_train.cols());
      std::vector<int> yb(static_cast<std::size_t>(bs));
      for (Eigen::Index i = 0; i < bs; ++i) {
        const auto r = order[static_cast<std::size_t>(start + i)];
        Xb.row(i) = X_train.row(r);
        yb[static_cast<std::size_t>(i)] = y_train[static_cast<std::size_t>(r)];
      }
      std::vector<Eigen::MatrixXd> masks;
      if (config.dropout > 0.0) {
        for (std::size_t l = 0; l + 1 < model.layers.size(); ++l) {
          Eigen::MatrixXd mask(bs, model.layers[l].W.rows());
          for (Eigen::Index i = 0; i < mask.size(); ++i) {
            mask(i) = rng.uniform() < keep ? 1.0 / keep : 0.0;
          }
          masks.push_back(std::move(mask));
        }
      }
      auto gr = mlp_loss_grad(model, Xb, yb, masks.empty() ? nullptr : &masks);
      if (!std::isfinite(gr.loss)) {
        throw DivergenceError("MLP loss became non-finite in epoch " + std::to_string(epoch));
      }
      loss_sum += gr.loss * static_cast<double>(bs);

      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      auto adam = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = config.beta1 * m + (1.0 - config.beta1) * g;
        v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
        param.array() -= config.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.eps);
      };
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        adam(model.layers[l].W, m1[l].W, m2[l].W, gr.grads[l].W);
        adam(model.layers[l].b, m1[l].b, m2[l].b, gr.grads[l].b);
      }
    }

    const Eigen::MatrixXd logits = forward(model, X_val, nullptr).Z.back();
    const double val_loss = cross_entropy(logits, y_val, nullptr);
    if (!std::isfinite(val_loss)) {
      throw DivergenceError("MLP validation loss became non-finite in epoch " + std::to_string(epoch));
    }
    int correct = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      Eigen::Index a = 0;
      logits.row(i).maxCoeff(&a);
      correct += a == y_val[static_cast<std::size_t>(i)];
    }
    log.train_loss.push_back(loss_sum / static_cast<double>(n));
    log.val_loss.push_back(val_loss);
    log.val_acc.push_back(static_cast<double>(correct) / static_cast<double>(logits.rows()));
    log.stopped_epoch = epoch;

    if (val_loss < best_val) {
      best_val = val_loss;
      best = model;
      log.best_epoch = epoch;
      wait = 0;
    } else if (++wait > config.patience) {
      break;
    }
  }
  return {std::move(best), std::move(log)};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

void write_vector(std::ostream& os, const char* tag, const Eigen::Ref<const Eigen::VectorXd>& v) {
  os << tag;
  for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << format_exact(v[i]);
  os << '\n';
}

Eigen::VectorXd read_vector(detail::TokenLines& in, const std::string& tag, Eigen::Index n) {
  auto t = in.expect(tag, tag + " values");
  if (static_cast<Eigen::Index>(t.size()) != n + 1) {
    throw ParseError(in.where() + tag + " needs " + std::to_string(n) + " values");
  }
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = in.number(t[static_cast<std::size_t>(i) + 1], tag);
  return v;
}

void write_schema(std::ostream& os, const std::string& id, const std::vector<std::string>& names) {
  os << "labels " << label_map_text() << '\n';
  os << "schema " << (id.empty() ? "unnamed" : id) << ' ' << names.size();
  for (const auto& n : names) os << ' ' << n;
  os << '\n';
}

void read_schema(detail::TokenLines& in, std::string& id, std::vector<std::string>& names) {
  auto labels = in.expect("labels", "label map");
  std::string map_text;
  for (std::size_t i = 1; i < labels.size(); ++i) map_text += (i > 1 ? " " : "") + labels[i];
  check_label_map_text(map_text);
  auto s = in.expect("schema", "feature schema");
  if (s.size() < 3) throw ParseError(in.where() + "schema line too short");
  id = s[1];
  const auto n = in.integer(s[2], "feature count");
  if (n < 0 || static_cast<std::size_t>(n) + 3 != s.size()) {
    throw ParseError(in.where() + "feature count does not match the listed names");
  }
  names.assign(s.begin() + 3, s.end());
}

void write_scaler(std::ostream& os, const std::optional<Standardizer>& s) {
  if (!s) {
    os << "scaler none\n";
    return;
  }
  os << "scaler " << s->size() << '\n';
  write_vector(os, "mean", s->mean);
  write_vector(os, "sd", s->sd);
}

std::optional<Standardizer> read_scaler(detail::TokenLines& in, const std::string& schema_id) {
  auto t = in.expect("scaler", "scaler");
  if (t.size() != 2) throw ParseError(in.where() + "malformed scaler line");
  if (t[1] == "none") return std::nullopt;
  const auto n = in.integer(t[1], "scaler size");
  Standardizer s;
  s.schema_id = schema_id;
  s.mean = read_vector(in, "mean", n);
  s.sd = read_vector(in, "sd", n);
  for (Eigen::Index j = 0; j < n; ++j) s.zero_variance.push_back(!(s.sd[j] > 0.0));
  return s;
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) write_vector(os, "row", m.row(r).transpose());
}

Eigen::MatrixXd read_matrix(detail::TokenLines& in, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) m.row(r) = read_vector(in, "row", cols).transpose();
  return m;
}

}  // namespace

void write_linear_model(const LinearModel& m, std::ostream& os) {
  os << "vigil-model logistic v" << kLinearFormatVersion << '\n';
  write_schema(os, m.schema_id, m.feature_names);
  os << "params l2=" << format_exact(m.l2) << " iterations=" << m.iterations << '\n';
  write_scaler(os, m.scaler);
  os << "weights " << m.weights.rows() << ' ' << m.weights.cols() << '\n';
  write_matrix(os, m.weights);
  write_vector(os, "bias", m.bias);
  os << "end\n";
}

LinearModel read_linear_model(std::istream& is) {
  detail::TokenLines in(is);
  detail::check_header(in.next("model header"), "logistic", kLinearFormatVersion);
  LinearModel m;
  read_schema(in, m.schema_id, m.feature_names);
  for (const auto& [k, v] : detail::key_values(in.expect("params", "parameters"), 1)) {
    if (k == "l2") m.l2 = in.number(v, k);
    else if (k == "iterations") m.iterations = static_cast<int>(in.integer(v, k));
    else throw ParseError(in.where() + "unknown parameter '" + k + "'");
  }
  m.scaler = read_scaler(in, m.schema_id);
  auto w = in.expect("weights", "weight shape");
  if (w.size() != 3) throw ParseError(in.where() + "malformed weights line");
  const auto rows = in.integer(w[1], "rows");
  const auto cols = in.integer(w[2], "cols");
  m.weights = read_matrix(in, rows, cols);
  m.bias = read_vector(in, "bias", rows);
  in.expect("end", "end marker");
  return m;
}

void write_mlp_model(const MlpModel& m, std::ostream& os) {
  os << "vigil-model mlp v" << kMlpFormatVersion << '\n';
  write_schema(os, m.schema_id, m.feature_names);
  os << "params dropout=" << format_exact(m.dropout) << '\n';
  write_scaler(os, m.scaler);
  os << "layers " << m.layers.size() << '\n';
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    os << "layer " << l << ' ' << m.layers[l].W.rows() << ' ' << m.layers[l].W.cols() << '\n';
    write_matrix(os, m.layers[l].W);
    write_vector(os, "bias", m.layers[l].b);
  }
  os << "end\n";
}

MlpModel read_mlp_model(std::istream& is) {
  detail::TokenLines in(is);
  detail::check_header(in.next("model header"), "mlp", kMlpFormatVersion);
  MlpModel m;
  read_schema(in, m.schema_id, m.feature_names);
  for (const auto& [k, v] : detail::key_values(in.expect("params", "parameters"), 1)) {
    if (k == "dropout") m.dropout = in.number(v, k);
    else throw ParseError(in.where() + "unknown parameter '" + k + "'");
  }
  m.scaler = read_scaler(in, m.schema_id);
  const auto n_layers = in.integer(in.expect("layers", "layer count").at(1), "layer count");
  for (long long l = 0; l < n_layers; ++l) {
    auto t = in.expect("layer", "layer " + std::to_string(l));
    if (t.size() != 4) throw ParseError(in.where() + "malformed layer line");
    DenseLayer layer;
    const auto rows = in.integer(t[2], "rows");
    const auto cols = in.integer(t[3], "cols");
    layer.W = read_matrix(in, rows, cols);
    layer.b = read_vector(in, "bias", rows);
    if (!m.layers.empty() && m.layers.back().W.rows() != layer.W.cols()) {
      throw ParseError(in.where() + "layer " + std::to_string(l) + " does not chain");
    }
    m.layers.push_back(std::move(layer));
  }
  in.expect("end", "end marker");
  return m;
}

void write_train_log_csv(const TrainLog& log, std::ostream& os) {
  os << "epoch,train_loss,val_loss,val_acc\n";
  for (std::size_t i = 0; i < log.train_loss.size(); ++i) {
    os << i << ',' << format_exact(log.train_loss[i]) << ',' << format_exact(log.val_loss[i]) << ','
       << format_exact(log.val_acc[i]) << '\n';
  }
}

}  // namespace vigil
