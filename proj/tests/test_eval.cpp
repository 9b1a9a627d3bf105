#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "vigil/dataio.hpp"
#include "vigil/errors.hpp"
#include "vigil/eval.hpp"
#include "vigil/features.hpp"
#include "vigil/rng.hpp"

using namespace vigil;

namespace {

ConfusionMatrix from_counts(std::initializer_list<double> v) {
  ConfusionMatrix cm;
  cm.counts.resize(3, 3);
  auto it = v.begin();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cm.counts(r, c) = *it++;
  return cm;
}

}  // namespace

TEST(Confusion, Examples) {
  const std::vector<int> t{0, 1, 2};
  EXPECT_EQ(confusion(t, t).counts, Eigen::Matrix3d::Identity());
  const std::vector<int> yt{0, 0, 1}, yp{0, 1, 1};
  const auto cm = confusion(yt, yp);
  EXPECT_EQ(cm.counts(0, 0), 1);
  EXPECT_EQ(cm.counts(0, 1), 1);
  EXPECT_EQ(cm.counts(1, 1), 1);
  EXPECT_EQ(cm.total(), 3);
  EXPECT_THROW(confusion(yt, std::span<const int>(t).first(2)), InputError);
  const std::vector<int> bad{0, 3, 1};
  EXPECT_THROW(confusion(bad, yp), InputError);
}

TEST(Confusion, ConservesCount) {
  Pcg32 rng(1);
  std::vector<int> a(500), b(500);
  for (auto& v : a) v = static_cast<int>(rng.below(3));
  for (auto& v : b) v = static_cast<int>(rng.below(3));
  const auto cm = confusion(a, b);
  EXPECT_EQ(cm.total(), 500);
  EXPECT_TRUE((cm.counts.array() >= 0).all());
  const auto m = metrics(cm);
  EXPECT_EQ(m.accuracy, cm.counts.trace() / cm.counts.sum());
}

TEST(Metrics, HandWorkedCase) {
  // rows = true, columns = predicted
  const auto cm = from_counts({5, 2, 1,
                               0, 6, 2,
                               1, 1, 4});
  const auto m = metrics(cm);
  const double p0 = 5.0 / 6, p1 = 6.0 / 9, p2 = 4.0 / 7;
  const double r0 = 5.0 / 8, r1 = 6.0 / 8, r2 = 4.0 / 6;
  const auto f = [](double p, double r) { return 2 * p * r / (p + r); };
  EXPECT_NEAR(m.accuracy, 15.0 / 22, 1e-12);
  EXPECT_NEAR(m.precision(0), p0, 1e-12);
  EXPECT_NEAR(m.recall(2), r2, 1e-12);
  EXPECT_NEAR(m.macro_precision, (p0 + p1 + p2) / 3, 1e-12);
  EXPECT_NEAR(m.macro_recall, (r0 + r1 + r2) / 3, 1e-12);
  EXPECT_NEAR(m.macro_f1, (f(p0, r0) + f(p1, r1) + f(p2, r2)) / 3, 1e-12);
}

TEST(Metrics, NeverPredictedClassCountsAsZero) {
  const auto cm = from_counts({3, 0, 0,
                               1, 0, 2,
                               0, 0, 4});
  const auto m = metrics(cm);
  EXPECT_EQ(m.precision(1), 0.0);
  EXPECT_EQ(m.recall(1), 0.0);
  EXPECT_EQ(m.f1(1), 0.0);
  EXPECT_NEAR(m.macro_precision, (3.0 / 4 + 0 + 4.0 / 6) / 3, 1e-12);
}

TEST(Metrics, PerfectAndRelabeled) {
  const auto perfect = metrics(from_counts({4, 0, 0, 0, 5, 0, 0, 0, 6}));
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.macro_f1, 1.0);
  const auto cm = from_counts({5, 2, 1, 0, 6, 2, 1, 1, 4});
  ConfusionMatrix p;
  const Eigen::Vector3i perm(2, 0, 1);
  p.counts.resize(3, 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p.counts(perm(r), perm(c)) = cm.counts(r, c);
  EXPECT_NEAR(metrics(p).macro_f1, metrics(cm).macro_f1, 1e-15);
  EXPECT_NEAR(metrics(p).macro_precision, metrics(cm).macro_precision, 1e-15);
}

TEST(Brier, Examples) {
  const std::vector<int> y{0, 1, 2};
  EXPECT_EQ(brier(Eigen::Matrix3d::Identity(), y), 0.0);
  EXPECT_NEAR(brier(Eigen::MatrixXd::Constant(3, 3, 1.0 / 3), y), 2.0 / 3, 1e-12);
  Eigen::MatrixXd p(2, 3);
  p << 0.7, 0.2, 0.1,
       0.1, 0.3, 0.6;
  const std::vector<int> t{0, 1};
  EXPECT_NEAR(brier(p, t), ((0.09 + 0.04 + 0.01) + (0.01 + 0.49 + 0.36)) / 2, 1e-12);
  p(0, 0) = 0.8;
  EXPECT_THROW(brier(p, t), InputError);
}

TEST(Brier, PermutationInvariant) {
  Pcg32 rng(4);
  Eigen::MatrixXd p(64, 3);
  std::vector<int> y(64);
  for (int i = 0; i < 64; ++i) {
    const double a = rng.uniform(), b = rng.uniform() * (1 - a);
    p.row(i) << a, b, 1 - a - b;
    y[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(3));
  }
  Eigen::MatrixXd q = p.colwise().reverse();
  std::vector<int> z(y.rbegin(), y.rend());
  EXPECT_EQ(brier(p, y), brier(q, z));
  const auto a = reliability(p, y), b = reliability(q, z);
  EXPECT_EQ(a.max_deviation, b.max_deviation);
}

TEST(Reliability, ConfidentAndCorrect) {
  const std::vector<int> y{0, 1, 2};
  const auto r = reliability(Eigen::Matrix3d::Identity(), y);
  ASSERT_EQ(r.bins.size(), 10u);
  EXPECT_EQ(r.bins[9].count, 3);
  EXPECT_EQ(r.max_deviation, 0.0);
  for (int b = 0; b < 9; ++b) EXPECT_EQ(r.bins[static_cast<std::size_t>(b)].count, 0);
}

TEST(Reliability, HalfRightBin) {
  Eigen::MatrixXd p(2, 3);
  p << 0.95, 0.05, 0.0,
       0.95, 0.0, 0.05;
  const std::vector<int> y{0, 1};
  const auto r = reliability(p, y);
  EXPECT_DOUBLE_EQ(r.bins[9].accuracy, 0.5);
  EXPECT_NEAR(r.max_deviation, 0.45, 1e-12);
}

TEST(Reliability, BinsPartitionSamples) {
  Pcg32 rng(6);
  Eigen::MatrixXd p(333, 3);
  std::vector<int> y(333);
  for (int i = 0; i < 333; ++i) {
    Eigen::Vector3d v(rng.uniform(), rng.uniform(), rng.uniform());
    p.row(i) = (v / v.sum()).transpose();
    y[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(3));
  }
  const auto r = reliability(p, y, 7);
  long long total = 0;
  for (std::size_t b = 0; b < r.bins.size(); ++b) {
    total += r.bins[b].count;
    if (b) {
      EXPECT_DOUBLE_EQ(r.bins[b].lo, r.bins[b - 1].hi);
    }
  }
  EXPECT_EQ(total, 333);
  EXPECT_EQ(r.bins.front().lo, 0.0);
  EXPECT_EQ(r.bins.back().hi, 1.0);
  EXPECT_GE(r.brier, 0.0);
  EXPECT_LE(r.brier, 2.0);
}

TEST(Reports, CsvHeaders) {
  const auto cm = from_counts({1, 0, 0, 0, 1, 0, 0, 0, 1});
  std::ostringstream a, b, c;
  write_metrics_csv(metrics(cm), a);
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "metric,class,value");
  const std::vector<int> y{0, 1, 2};
  write_reliability_csv(reliability(Eigen::Matrix3d::Identity(), y), b);
  EXPECT_EQ(b.str().substr(0, b.str().find('\n')), "bin_lo,bin_hi,count,mean_conf,accuracy");
  write_metrics_text(metrics(cm), cm, c);
  EXPECT_NE(c.str().find("macro"), std::string::npos);
}

// ---------------------------------------------------------------------------

TEST(Grid, ParseAndProduct) {
  const auto g = parse_grid("eta=0.01,0.1;n_rounds=5,10", 3, 7);
  EXPECT_EQ(g.folds, 3);
  const auto cfgs = g.configurations();
  ASSERT_EQ(cfgs.size(), 4u);
  EXPECT_EQ(cfgs[0].at("eta"), 0.01);
  EXPECT_EQ(cfgs[1].at("n_rounds"), 10);
  EXPECT_EQ(cfgs[2].at("eta"), 0.1);
  EXPECT_THROW(parse_grid("", 3, 1), ConfigError);
  EXPECT_THROW(parse_grid("eta", 3, 1), ConfigError);
  EXPECT_THROW(parse_grid("eta=0.1", 1, 1), ConfigError);
}

TEST(Folds, StratifiedAndDeterministic) {
  std::vector<int> y(47);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 3);
  const auto f = stratified_folds(y, 5, 3);
  EXPECT_EQ(f, stratified_folds(y, 5, 3));
  for (int k = 0; k < 3; ++k) {
    std::vector<int> per(5, 0);
    for (std::size_t i = 0; i < y.size(); ++i) per[static_cast<std::size_t>(f[i])] += y[i] == k;
    EXPECT_LE(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()), 1);
  }
  const std::vector<int> tiny{0, 0, 0, 1, 2, 2};
  EXPECT_THROW(stratified_folds(tiny, 2, 1), StratificationError);
}

namespace {
FeatureTable small_table(std::uint64_t seed, std::size_t per_class) {
  SynthConfig sc;
  sc.n_per_class = per_class;
  return extract_table(synth_dataset(sc, seed), FeatureSchema::compact());
}
}  // namespace

TEST(CrossValidate, OneConfigTwoFolds) {
  const auto t = small_table(1, 6);
  const auto res = cross_validate(t, parse_grid("n_rounds=3", 2, 1), ModelFamily::gbt);
  ASSERT_EQ(res.size(), 1u);
  EXPECT_EQ(res[0].fold_accuracy.size(), 2u);
  EXPECT_EQ(res[0].fold_macro_f1.size(), 2u);
}

TEST(CrossValidate, DuplicateConfigsScoreIdentically) {
  const auto t = small_table(2, 6);
  const auto res = cross_validate(t, parse_grid("n_rounds=3,3;eta=0.3", 3, 5), ModelFamily::gbt);
  ASSERT_EQ(res.size(), 2u);
  EXPECT_EQ(res[0].fold_macro_f1, res[1].fold_macro_f1);
  EXPECT_EQ(res[0].config_index, 0u);  // ties fall back to configuration order
}

TEST(CrossValidate, LargerStepWinsAtFiveRounds) {
  // A harder generator setting with stumps, where 5 rounds at eta 0.01 stay
  // near the uniform prior.
  SynthConfig sc;
  sc.n_per_class = 60;
  sc.noise_sigma = 30.0;
  sc.wake.amplitude_uv = 3.0;
  sc.rem.amplitude_uv = 3.0;
  sc.sws.amplitude_uv = 6.0;
  const auto t = extract_table(synth_dataset(sc, 3), FeatureSchema::compact());
  const auto res =
      cross_validate(t, parse_grid("eta=0.01,0.1;n_rounds=5;max_depth=1", 5, 3), ModelFamily::gbt);
  ASSERT_EQ(res.size(), 2u);
  EXPECT_EQ(res[0].params.at("eta"), 0.1);
  EXPECT_GT(res[0].mean_macro_f1, res[1].mean_macro_f1);
}

TEST(CrossValidate, LogisticFamilyAndCsv) {
  const auto t = small_table(4, 8);
  const auto res = cross_validate(t, parse_grid("l2=0.001,1", 2, 2), ModelFamily::logistic);
  ASSERT_EQ(res.size(), 2u);
  EXPECT_GE(res[0].mean_macro_f1, res[1].mean_macro_f1);
  std::ostringstream os;
  write_cv_csv(res, os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "rank,config,l2,mean_macro_f1,sd_macro_f1,mean_accuracy,sd_accuracy");
}
