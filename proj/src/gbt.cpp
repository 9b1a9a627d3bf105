#include "vigil/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "model_text.hpp"
#include "vigil/errors.hpp"
#include "vigil/rng.hpp"
#include "vigil/textio.hpp"

namespace vigil {

void GbtConfig::validate() const {
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta must be in (0, 1]");
  if (n_rounds < 0) throw ConfigError("n_rounds must be >= 0");
  if (max_depth < 0) throw ConfigError("max_depth must be >= 0");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw ConfigError("subsample must be in (0, 1]");
  if (!(colsample > 0.0 && colsample <= 1.0)) throw ConfigError("colsample must be in (0, 1]");
  if (!(l2 >= 0.0)) throw ConfigError("l2 (lambda) must be >= 0");
  if (!(min_split_loss >= 0.0)) throw ConfigError("min_split_loss (gamma) must be >= 0");
  if (!(min_child_weight >= 0.0)) throw ConfigError("min_child_weight must be >= 0");
  if (n_classes < 2) throw ConfigError("n_classes must be >= 2");
}

int Tree::leaf_index(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = x[n.feature] < n.threshold ? n.left : n.right;
  }
  return i;
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
    best = std::max(best, d[i]);
  }
  return best;
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

GradHess grad_hess_softmax(const Eigen::Ref<const Eigen::VectorXd>& probs, int true_class) {
  GradHess gh;
  gh.g = probs;
  gh.g[true_class] -= 1.0;
  gh.h = (probs.array() * (1.0 - probs.array())).matrix();
  return gh;
}

double split_gain(double g_left, double h_left, double g_right, double h_right, double l2,
                  double min_split_loss) {
  const double g = g_left + g_right;
  const double h = h_left + h_right;
  return 0.5 * (g_left * g_left / (h_left + l2) + g_right * g_right / (h_right + l2) -
                g * g / (h + l2)) -
         min_split_loss;
}

namespace {

double midpoint(double a, double b) {
  const double m = a + (b - a) / 2.0;
  return m > a ? m : b;
}

}  // namespace

std::optional<SplitCandidate> find_best_split(std::span<const ColumnEntry> col, int feature,
                                              const GbtConfig& config) {
  if (col.size() < 2) return std::nullopt;
  double g_total = 0.0, h_total = 0.0;
  for (const auto& e : col) {
    g_total += e.g;
    h_total += e.h;
  }
  std::optional<SplitCandidate> best;
  double gl = 0.0, hl = 0.0;
  for (std::size_t i = 0; i + 1 < col.size(); ++i) {
    gl += col[i].g;
    hl += col[i].h;
    if (!(col[i].value < col[i + 1].value)) continue;
    const double gr = g_total - gl;
    const double hr = h_total - hl;
    if (hl < config.min_child_weight || hr < config.min_child_weight) continue;
    const double gain = split_gain(gl, hl, gr, hr, config.l2, config.min_split_loss);
    if (gain > 0.0 && (!best || gain > best->gain)) {
      best = SplitCandidate{feature, midpoint(col[i].value, col[i + 1].value), gain, gl, hl, gr, hr};
    }
  }
  return best;
}

std::optional<SplitCandidate> find_best_node_split(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                                   std::span<const int> rows,
                                                   std::span<const double> g,
                                                   std::span<const double> h,
                                                   std::span<const int> features,
                                                   const GbtConfig& config) {
  std::optional<SplitCandidate> best;
  std::vector<ColumnEntry> col(rows.size());
  std::vector<int> order(features.begin(), features.end());
  std::sort(order.begin(), order.end());
  for (int f : order) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const int r = rows[i];
      col[i] = {X(r, f), g[static_cast<std::size_t>(r)], h[static_cast<std::size_t>(r)]};
    }
    std::stable_sort(col.begin(), col.end(),
                     [](const ColumnEntry& a, const ColumnEntry& b) { return a.value < b.value; });
    auto cand = find_best_split(col, f, config);
    if (cand && (!best || cand->gain > best->gain)) best = cand;
  }
  return best;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const double> g,
              std::span<const double> h, std::span<const int> features, const GbtConfig& cfg)
      : X_(X), g_(g), h_(h), features_(features), cfg_(cfg) {}

  std::vector<TreeNode> build(std::vector<int> rows) {
    grow(std::move(rows), 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<int> rows, int depth) {
    const int idx = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    nodes_.back().cover = static_cast<double>(rows.size());

    std::optional<SplitCandidate> split;
    if (depth < cfg_.max_depth && rows.size() >= 2) {
      split = find_best_node_split(X_, rows, g_, h_, features_, cfg_);
    }
    if (!split) {
      double gs = 0.0, hs = 0.0;
      for (int r : rows) {
        gs += g_[static_cast<std::size_t>(r)];
        hs += h_[static_cast<std::size_t>(r)];
      }
      const double denom = hs + cfg_.l2;
      nodes_[static_cast<std::size_t>(idx)].weight = denom > 0.0 ? -gs / denom : 0.0;
      return idx;
    }
    std::vector<int> left, right;
    for (int r : rows) (X_(r, split->feature) < split->threshold ? left : right).push_back(r);
    {
      auto& n = nodes_[static_cast<std::size_t>(idx)];
      n.feature = split->feature;
      n.threshold = split->threshold;
      n.gain = split->gain;
    }
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    nodes_[static_cast<std::size_t>(idx)].left = l;
    nodes_[static_cast<std::size_t>(idx)].right = r;
    return idx;
  }

  const Eigen::Ref<const Eigen::MatrixXd>& X_;
  std::span<const double> g_, h_;
  std::span<const int> features_;
  const GbtConfig& cfg_;
  std::vector<TreeNode> nodes_;
};

// Sorted sample of max(1, round(n * fraction)) indices from [0, n).
std::vector<int> sample_indices(int n, double fraction, Pcg32& rng) {
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  if (fraction >= 1.0) return all;
  const auto k = std::clamp<long long>(std::llround(n * fraction), 1, n);
  for (long long i = 0; i < k; ++i) {
    const auto j = i + rng.below(static_cast<std::uint32_t>(n - i));
    std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
  }
  all.resize(static_cast<std::size_t>(k));
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

int argmax(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<int>(best);
}

double softmax_log_loss(const Eigen::Ref<const Eigen::MatrixXd>& margins, std::span<const int> y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < margins.rows(); ++i) {
    const double m = margins.row(i).maxCoeff();
    const double lse = m + std::log((margins.row(i).array() - m).exp().sum());
    total += lse - margins(i, y[static_cast<std::size_t>(i)]);
  }
  return margins.rows() ? total / static_cast<double>(margins.rows()) : 0.0;
}

GbtModel train_gbt(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> y,
                   const GbtConfig& config, std::vector<std::string> feature_names,
                   std::string schema_id, GbtTrainReport* report) {
  config.validate();
  const auto n = static_cast<int>(X.rows());
  const auto d = static_cast<int>(X.cols());
  const int k_classes = config.n_classes;
  if (n == 0) throw InputError("training set is empty");
  if (static_cast<std::size_t>(n) != y.size()) {
    throw InputError("feature rows (" + std::to_string(n) + ") and labels (" +
                     std::to_string(y.size()) + ") differ");
  }
  if (!X.allFinite()) throw InputError("training features contain NaN or Inf");
  std::vector<int> class_count(static_cast<std::size_t>(k_classes), 0);
  for (int label : y) {
    if (label < 0 || label >= k_classes) {
      throw InputError("label " + std::to_string(label) + " outside 0.." +
                       std::to_string(k_classes - 1));
    }
    ++class_count[static_cast<std::size_t>(label)];
  }
  if (feature_names.empty()) {
    for (int j = 0; j < d; ++j) feature_names.push_back("f" + std::to_string(j));
  }
  if (static_cast<int>(feature_names.size()) != d) {
    throw SchemaError("feature name count differs from matrix width");
  }

  GbtModel model;
  model.config = config;
  model.base_score = Eigen::VectorXd::Zero(k_classes);
  model.feature_names = std::move(feature_names);
  model.schema_id = schema_id.empty() ? std::string("unnamed") : std::move(schema_id);
  model.trees.reserve(static_cast<std::size_t>(config.n_rounds * k_classes));

  std::vector<std::string> warnings;
  for (int c = 0; c < k_classes; ++c) {
    if (class_count[static_cast<std::size_t>(c)] == 0) {
      warnings.push_back("class " + std::to_string(c) + " has no training rows");
    }
  }

  Eigen::MatrixXd margins = model.base_score.transpose().replicate(n, 1);
  std::vector<double> losses;
  std::vector<std::vector<double>> g(static_cast<std::size_t>(k_classes),
                                     std::vector<double>(static_cast<std::size_t>(n)));
  auto h = g;

  for (int round = 0; round < config.n_rounds; ++round) {
    for (int i = 0; i < n; ++i) {
      const auto gh = grad_hess_softmax(softmax(margins.row(i).transpose()),
                                        y[static_cast<std::size_t>(i)]);
      for (int c = 0; c < k_classes; ++c) {
        g[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] = gh.g[c];
        h[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] = gh.h[c];
      }
    }
    for (int c = 0; c < k_classes; ++c) {
      Pcg32 rng(derive_seed(config.seed, static_cast<std::uint64_t>(round),
                            static_cast<std::uint64_t>(c)));
      auto rows = sample_indices(n, config.subsample, rng);
      const auto features = sample_indices(d, config.colsample, rng);
      Tree tree;
      tree.round = round;
      tree.cls = c;
      tree.nodes = TreeBuilder(X, g[static_cast<std::size_t>(c)], h[static_cast<std::size_t>(c)],
                               features, config)
                       .build(std::move(rows));
      for (int i = 0; i < n; ++i) {
        margins(i, c) += config.eta * tree.leaf_weight(X.row(i).transpose());
      }
      model.trees.push_back(std::move(tree));
    }
    if (report) losses.push_back(softmax_log_loss(margins, y));
  }

  if (report) {
    report->train_loss = std::move(losses);
    report->margins = std::move(margins);
    report->warnings = std::move(warnings);
  }
  return model;
}

Eigen::VectorXd predict_margin(const GbtModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.n_features()) {
    throw SchemaError("input has " + std::to_string(x.size()) + " features, model " +
                      model.schema_id + " expects " + std::to_string(model.n_features()));
  }
  Eigen::VectorXd m = model.base_score;
  for (const auto& t : model.trees) m[t.cls] += model.config.eta * t.leaf_weight(x);
  return m;
}

Eigen::VectorXd predict_proba(const GbtModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return softmax(predict_margin(model, x));
}

VigilanceState predict_label(const GbtModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return state_from_code(argmax(predict_margin(model, x)));
}

Eigen::MatrixXd predict_margin_rows(const GbtModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X) {
  Eigen::MatrixXd out(X.rows(), model.n_classes());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out.row(i) = predict_margin(model, X.row(i).transpose()).transpose();
  }
  return out;
}

Eigen::MatrixXd predict_proba_rows(const GbtModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X) {
  Eigen::MatrixXd out(X.rows(), model.n_classes());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out.row(i) = predict_proba(model, X.row(i).transpose()).transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void write_gbt_model(const GbtModel& model, std::ostream& os) {
  const auto& c = model.config;
  os << "vigil-model gbt v" << kGbtFormatVersion << '\n';
  os << "labels " << label_map_text() << '\n';
  os << "schema " << model.schema_id << ' ' << model.feature_names.size();
  for (const auto& n : model.feature_names) {
    if (n.find_first_of(" \t\n") != std::string::npos) {
      throw FormatError("feature name '" + n + "' contains whitespace");
    }
    os << ' ' << n;
  }
  os << '\n';
  os << "config eta=" << format_exact(c.eta) << " n_rounds=" << c.n_rounds
     << " max_depth=" << c.max_depth << " subsample=" << format_exact(c.subsample)
     << " colsample=" << format_exact(c.colsample)
     << " min_split_loss=" << format_exact(c.min_split_loss) << " l2=" << format_exact(c.l2)
     << " min_child_weight=" << format_exact(c.min_child_weight) << " seed=" << c.seed
     << " n_classes=" << c.n_classes << '\n';
  os << "base_score";
  for (Eigen::Index k = 0; k < model.base_score.size(); ++k) os << ' ' << format_exact(model.base_score[k]);
  os << '\n';
  os << "trees " << model.trees.size() << '\n';
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const auto& tree = model.trees[t];
    os << "tree " << t << " round " << tree.round << " class " << tree.cls << " nodes "
       << tree.nodes.size() << '\n';
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const auto& n = tree.nodes[i];
      os << "node " << i << ' ';
      if (n.is_leaf()) {
        os << "leaf " << format_exact(n.weight);
      } else {
        os << "split " << n.feature << ' ' << format_exact(n.threshold) << ' ' << n.left << ' '
           << n.right << ' ' << (n.default_left ? 'L' : 'R') << ' ' << format_exact(n.gain);
      }
      if (model.has_cover) os << ' ' << format_exact(n.cover);
      os << '\n';
    }
  }
  os << "end\n";
}

GbtModel read_gbt_model(std::istream& is) {
  detail::TokenLines in(is);
  detail::check_header(in.next("model header"), "gbt", kGbtFormatVersion);

  auto labels = in.expect("labels", "label map");
  std::string map_text;
  for (std::size_t i = 1; i < labels.size(); ++i) map_text += (i > 1 ? " " : "") + labels[i];
  check_label_map_text(map_text);

  GbtModel model;
  auto schema = in.expect("schema", "feature schema");
  if (schema.size() < 3) throw ParseError(in.where() + "schema line too short");
  model.schema_id = schema[1];
  const auto n_names = in.integer(schema[2], "feature count");
  if (n_names < 0 || static_cast<std::size_t>(n_names) + 3 != schema.size()) {
    throw ParseError(in.where() + "feature count does not match the listed names");
  }
  model.feature_names.assign(schema.begin() + 3, schema.end());

  for (const auto& [k, v] : detail::key_values(in.expect("config", "config"), 1)) {
    auto& c = model.config;
    if (k == "eta") c.eta = in.number(v, k);
    else if (k == "n_rounds") c.n_rounds = static_cast<int>(in.integer(v, k));
    else if (k == "max_depth") c.max_depth = static_cast<int>(in.integer(v, k));
    else if (k == "subsample") c.subsample = in.number(v, k);
    else if (k == "colsample") c.colsample = in.number(v, k);
    else if (k == "min_split_loss") c.min_split_loss = in.number(v, k);
    else if (k == "l2") c.l2 = in.number(v, k);
    else if (k == "min_child_weight") c.min_child_weight = in.number(v, k);
    else if (k == "seed") c.seed = static_cast<std::uint64_t>(in.integer(v, k));
    else if (k == "n_classes") c.n_classes = static_cast<int>(in.integer(v, k));
    else throw ParseError(in.where() + "unknown config key '" + k + "'");
  }
  model.config.validate();

  auto base = in.expect("base_score", "base score");
  if (static_cast<int>(base.size()) != model.config.n_classes + 1) {
    throw ParseError(in.where() + "base_score needs one value per class");
  }
  model.base_score.resize(model.config.n_classes);
  for (int k = 0; k < model.config.n_classes; ++k) {
    model.base_score[k] = in.number(base[static_cast<std::size_t>(k) + 1], "base_score");
  }

  const auto n_trees = in.integer(in.expect("trees", "tree count").at(1), "tree count");
  bool any_missing_cover = false;
  for (long long t = 0; t < n_trees; ++t) {
    const std::string tree_ctx = "tree " + std::to_string(t);
    auto th = in.expect("tree", tree_ctx + " header");
    if (th.size() != 8) throw ParseError(in.where() + "malformed " + tree_ctx + " header");
    Tree tree;
    tree.round = static_cast<int>(in.integer(th[3], "round"));
    tree.cls = static_cast<int>(in.integer(th[5], "class"));
    if (tree.cls < 0 || tree.cls >= model.config.n_classes) {
      throw ParseError(in.where() + tree_ctx + " has class outside the label map");
    }
    const auto n_nodes = in.integer(th[7], "node count");
    if (n_nodes <= 0) throw ParseError(in.where() + tree_ctx + " has no nodes");
    tree.nodes.resize(static_cast<std::size_t>(n_nodes));
    for (long long i = 0; i < n_nodes; ++i) {
      const std::string ctx = tree_ctx + " node " + std::to_string(i);
      auto nt = in.next(ctx);
      if (nt.size() < 4 || nt[0] != "node" || in.integer(nt[1], ctx) != i) {
        throw ParseError(in.where() + "malformed or out-of-order " + ctx);
      }
      auto& node = tree.nodes[static_cast<std::size_t>(i)];
      std::size_t cover_at = 0;
      if (nt[2] == "leaf") {
        node.weight = in.number(nt[3], ctx + " weight");
        cover_at = 4;
      } else if (nt[2] == "split" && nt.size() >= 9) {
        node.feature = static_cast<int>(in.integer(nt[3], ctx + " feature"));
        node.threshold = in.number(nt[4], ctx + " threshold");
        node.left = static_cast<int>(in.integer(nt[5], ctx + " left"));
        node.right = static_cast<int>(in.integer(nt[6], ctx + " right"));
        node.default_left = nt[7] == "L";
        node.gain = in.number(nt[8], ctx + " gain");
        cover_at = 9;
        if (node.feature < 0 || node.feature >= static_cast<int>(model.feature_names.size()) ||
            node.left <= i || node.right <= i || node.left >= n_nodes || node.right >= n_nodes ||
            !std::isfinite(node.threshold)) {
          throw ParseError(in.where() + ctx + " has invalid structure");
        }
      } else {
        throw ParseError(in.where() + "malformed " + ctx);
      }
      if (nt.size() == cover_at + 1) {
        node.cover = in.number(nt[cover_at], ctx + " cover");
      } else if (nt.size() == cover_at) {
        any_missing_cover = true;
      } else {
        throw ParseError(in.where() + "trailing tokens on " + ctx);
      }
    }
    model.trees.push_back(std::move(tree));
  }
  in.expect("end", "end marker");
  model.has_cover = !any_missing_cover;
  return model;
}

void save_model(const GbtModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& os) { write_gbt_model(model, os); });
}

GbtModel load_gbt_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open model '" + path.string() + "'");
  return read_gbt_model(is);
}

std::string model_summary(const GbtModel& model) {
  int depth = 0;
  for (const auto& t : model.trees) depth = std::max(depth, t.depth());
  std::ostringstream os;
  os << "gbt: " << model.rounds() << " rounds x " << model.n_classes() << " classes, depth <= "
     << depth << ", " << model.n_features() << " features, labels " << label_map_text();
  return os.str();
}

}  // namespace vigil
