#include "vigil/explain.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <thread>

#include "vigil/errors.hpp"
#include "vigil/textio.hpp"

namespace vigil {

GainImportance gain_importance(const GbtModel& model) {
  GainImportance imp;
  imp.features = model.feature_names;
  imp.total_gain = Eigen::VectorXd::Zero(model.n_features());
  for (const auto& t : model.trees) {
    for (const auto& n : t.nodes) {
      if (!n.is_leaf()) imp.total_gain[n.feature] += n.gain;
    }
  }
  const double total = imp.total_gain.sum();
  imp.no_splits = !(total > 0.0);
  imp.share = imp.no_splits ? Eigen::VectorXd::Zero(imp.total_gain.size())
                            : Eigen::VectorXd(imp.total_gain / total);
  return imp;
}

void write_importance_csv(const GainImportance& imp, std::ostream& os) {
  os << "feature,total_gain,share\n";
  for (std::size_t j = 0; j < imp.features.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    os << imp.features[j] << ',' << format_exact(imp.total_gain[i]) << ','
       << format_exact(imp.share[i]) << '\n';
  }
}

double tree_expected_value(const Tree& tree) {
  // Leaves weighted by cover; internal covers equal the sum of their children.
  double num = 0.0;
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) num += n.cover * n.weight;
  }
  return num / tree.nodes.front().cover;
}

namespace {

// One entry of the unique-feature path used by the path-dependent recursion.
struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;  // share of cover flowing down when feature is absent
  double one_fraction = 0.0;   // 1 if x follows this branch, else 0
  double pweight = 0.0;        // permutation weight
};

// Appends a feature to the path and updates the permutation weights.
void extend_path(std::vector<PathElement>& path, int depth, double zero_fraction,
                 double one_fraction, int feature) {
  path[static_cast<std::size_t>(depth)] = {feature, zero_fraction, one_fraction,
                                           depth == 0 ? 1.0 : 0.0};
  for (int i = depth - 1; i >= 0; --i) {
    auto& next = path[static_cast<std::size_t>(i) + 1];
    auto& cur = path[static_cast<std::size_t>(i)];
    next.pweight += one_fraction * cur.pweight * (i + 1) / static_cast<double>(depth + 1);
    cur.pweight = zero_fraction * cur.pweight * (depth - i) / static_cast<double>(depth + 1);
  }
}

// Undoes extend_path for the element at `index`.
void unwind_path(std::vector<PathElement>& path, int depth, int index) {
  const double one = path[static_cast<std::size_t>(index)].one_fraction;
  const double zero = path[static_cast<std::size_t>(index)].zero_fraction;
  double next_one = path[static_cast<std::size_t>(depth)].pweight;
  for (int i = depth - 1; i >= 0; --i) {
    auto& cur = path[static_cast<std::size_t>(i)];
    if (one != 0.0) {
      const double tmp = cur.pweight;
      cur.pweight = next_one * (depth + 1) / ((i + 1) * one);
      next_one = tmp - cur.pweight * zero * (depth - i) / static_cast<double>(depth + 1);
    } else {
      cur.pweight = cur.pweight * (depth + 1) / (zero * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    auto& cur = path[static_cast<std::size_t>(i)];
    const auto& nx = path[static_cast<std::size_t>(i) + 1];
    cur.feature = nx.feature;
    cur.zero_fraction = nx.zero_fraction;
    cur.one_fraction = nx.one_fraction;
  }
}

// Total permutation weight if the element at `index` were unwound.
double unwound_path_sum(const std::vector<PathElement>& path, int depth, int index) {
  const double one = path[static_cast<std::size_t>(index)].one_fraction;
  const double zero = path[static_cast<std::size_t>(index)].zero_fraction;
  double next_one = path[static_cast<std::size_t>(depth)].pweight;
  double total = 0.0;
  for (int i = depth - 1; i >= 0; --i) {
    const auto& cur = path[static_cast<std::size_t>(i)];
    if (one != 0.0) {
      const double tmp = next_one * (depth + 1) / ((i + 1) * one);
      total += tmp;
      next_one = cur.pweight - tmp * zero * ((depth - i) / static_cast<double>(depth + 1));
    } else if (zero != 0.0) {
      total += (cur.pweight / zero) / ((depth - i) / static_cast<double>(depth + 1));
    }
  }
  return total;
}

struct ShapRecursion {
  const Tree& tree;
  const Eigen::Ref<const Eigen::VectorXd>& x;
  double scale;
  Eigen::Ref<Eigen::VectorXd> phi;

  void recurse(int node, std::vector<PathElement> path, int depth, double zero_fraction,
               double one_fraction, int feature) {
    extend_path(path, depth, zero_fraction, one_fraction, feature);
    const auto& n = tree.nodes[static_cast<std::size_t>(node)];
    if (n.is_leaf()) {
      for (int i = 1; i <= depth; ++i) {
        const auto& e = path[static_cast<std::size_t>(i)];
        const double w = unwound_path_sum(path, depth, i);
        phi[e.feature] += w * (e.one_fraction - e.zero_fraction) * n.weight * scale;
      }
      return;
    }
    const int hot = x[n.feature] < n.threshold ? n.left : n.right;
    const int cold = hot == n.left ? n.right : n.left;
    const double hot_zero = tree.nodes[static_cast<std::size_t>(hot)].cover / n.cover;
    const double cold_zero = tree.nodes[static_cast<std::size_t>(cold)].cover / n.cover;
    double incoming_zero = 1.0;
    double incoming_one = 1.0;
    // A feature already on the path is folded into the new branch element.
    int k = 1;
    for (; k <= depth; ++k) {
      if (path[static_cast<std::size_t>(k)].feature == n.feature) break;
    }
    if (k <= depth) {
      incoming_zero = path[static_cast<std::size_t>(k)].zero_fraction;
      incoming_one = path[static_cast<std::size_t>(k)].one_fraction;
      unwind_path(path, depth, k);
      --depth;
    }
    recurse(hot, path, depth + 1, hot_zero * incoming_zero, incoming_one, n.feature);
    recurse(cold, path, depth + 1, cold_zero * incoming_zero, 0.0, n.feature);
  }
};

}  // namespace

void tree_shap_accumulate(const Tree& tree, const Eigen::Ref<const Eigen::VectorXd>& x,
                          double scale, Eigen::Ref<Eigen::VectorXd> phi) {
  if (tree.nodes.front().is_leaf()) return;
  const int max_depth = tree.depth();
  std::vector<PathElement> path(static_cast<std::size_t>(max_depth) + 2);
  ShapRecursion rec{tree, x, scale, phi};
  rec.recurse(0, std::move(path), 0, 1.0, 1.0, -1);
}

ShapValues tree_shap(const GbtModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (!model.has_cover) {
    throw CapabilityError("model file carries no cover counts; TreeSHAP needs a v1 model "
                          "trained by this library");
  }
  if (x.size() != model.n_features()) {
    throw SchemaError("input has " + std::to_string(x.size()) + " features, model " +
                      model.schema_id + " expects " + std::to_string(model.n_features()));
  }
  ShapValues sv;
  sv.base = model.base_score;
  sv.phi = Eigen::MatrixXd::Zero(model.n_features(), model.n_classes());
  const double eta = model.config.eta;
  for (const auto& t : model.trees) {
    sv.base[t.cls] += eta * tree_expected_value(t);
    tree_shap_accumulate(t, x, eta, sv.phi.col(t.cls));
  }
  return sv;
}

ShapSummary shap_summary(const GbtModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X,
                         unsigned threads) {
  if (X.rows() < 1) throw InputError("SHAP summary needs at least one row");
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<ShapValues> per_row(n);
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      try {
        per_row[i] = tree_shap(model, X.row(static_cast<Eigen::Index>(i)).transpose());
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, n);
  if (workers == 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk, e = std::min(n, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ShapSummary s;
  const Eigen::Index d = model.n_features();
  const int k = model.n_classes();
  s.base = per_row.front().base;
  s.mean_abs = Eigen::VectorXd::Zero(d);
  s.rows.reserve(n * static_cast<std::size_t>(d * k));
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      for (int c = 0; c < k; ++c) {
        const double phi = per_row[i].phi(j, c);
        s.rows.push_back({i, model.feature_names[static_cast<std::size_t>(j)],
                          X(static_cast<Eigen::Index>(i), j), state_from_code(c), phi});
        s.mean_abs[j] += std::abs(phi);
      }
    }
  }
  s.mean_abs /= static_cast<double>(n * static_cast<std::size_t>(k));
  std::vector<std::size_t> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return s.mean_abs[static_cast<Eigen::Index>(a)] > s.mean_abs[static_cast<Eigen::Index>(b)];
  });
  for (auto j : order) s.ranking.push_back(model.feature_names[j]);
  return s;
}

void write_shap_csv(const ShapSummary& s, std::ostream& os) {
  os << "row,feature,feature_value,class,phi\n";
  for (const auto& r : s.rows) {
    os << r.row << ',' << r.feature << ',' << format_exact(r.value) << ',' << to_string(r.cls)
       << ',' << format_exact(r.phi) << '\n';
  }
}

void write_shap_ranking_csv(const ShapSummary& s, const std::vector<std::string>& names,
                            std::ostream& os) {
  os << "rank,feature,mean_abs_phi\n";
  for (std::size_t r = 0; r < s.ranking.size(); ++r) {
    const auto j = std::find(names.begin(), names.end(), s.ranking[r]) - names.begin();
    os << r + 1 << ',' << s.ranking[r] << ',' << format_exact(s.mean_abs[j]) << '\n';
  }
}

}  // namespace vigil
