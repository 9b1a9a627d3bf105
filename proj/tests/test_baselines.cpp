#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "vigil/baselines.hpp"
#include "vigil/errors.hpp"
#include "vigil/rng.hpp"

using namespace vigil;

namespace {

struct Problem {
  Eigen::MatrixXd X;
  std::vector<int> y;
};

Problem blobs(std::uint64_t seed, int n, int d, double sep = 3.0) {
  Pcg32 rng(seed);
  Problem p;
  p.X.resize(n, d);
  for (int i = 0; i < n; ++i) {
    const int k = i % 3;
    p.y.push_back(k);
    for (int j = 0; j < d; ++j) p.X(i, j) = rng.normal() + (j % 3 == k ? sep : 0.0);
  }
  return p;
}

double accuracy(const Eigen::MatrixXd& probs, const std::vector<int>& y) {
  int ok = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index k = 0;
    probs.row(i).maxCoeff(&k);
    ok += k == y[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(ok) / static_cast<double>(probs.rows());
}

// Relative error ||a - n|| / (||a|| + ||n||) of one parameter block.
template <typename F>
double block_error(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& analytic, F loss) {
  Eigen::MatrixXd numeric(param.rows(), param.cols());
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    double& p = param.data()[i];
    const double saved = p;
    const double h = 1e-5 * std::max(1.0, std::abs(saved));
    p = saved + h;
    const double up = loss();
    p = saved - h;
    const double down = loss();
    p = saved;
    numeric.data()[i] = (up - down) / (2.0 * h);
  }
  const double denom = analytic.norm() + numeric.norm();
  return denom == 0.0 ? 0.0 : (analytic - numeric).norm() / denom;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(Logistic, GradientMatchesFiniteDifferences) {
  const auto p = blobs(1, 10, 4);
  Pcg32 rng(2);
  Eigen::MatrixXd W(3, 4);
  Eigen::VectorXd b(3);
  for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = 0.3 * rng.normal();
  for (Eigen::Index i = 0; i < 3; ++i) b(i) = 0.1 * rng.normal();
  for (double l2 : {0.0, 0.1}) {
    Eigen::MatrixXd gW;
    Eigen::VectorXd gb;
    logistic_loss_grad(W, b, p.X, p.y, l2, &gW, &gb);
    Eigen::MatrixXd Wc = W;
    Eigen::MatrixXd bc = b;
    const auto loss = [&] { return logistic_loss_grad(Wc, bc.col(0), p.X, p.y, l2); };
    for (Eigen::Index i = 0; i < W.size(); ++i) {
      const double saved = Wc.data()[i];
      Wc.data()[i] = saved + 1e-6;
      const double up = loss();
      Wc.data()[i] = saved - 1e-6;
      const double down = loss();
      Wc.data()[i] = saved;
      EXPECT_NEAR(gW.data()[i], (up - down) / 2e-6, 1e-6);
    }
    EXPECT_LT(block_error(bc, gb, loss), 1e-6);
  }
}

TEST(Logistic, ZeroIterationsIsUniform) {
  const auto p = blobs(3, 30, 2);
  LogisticConfig cfg;
  cfg.max_iter = 0;
  const auto m = train_logistic(p.X, p.y, cfg);
  EXPECT_TRUE(m.weights.isZero(0.0));
  const auto probs = logistic_predict_rows(m, p.X);
  EXPECT_NEAR((probs.array() - 1.0 / 3.0).abs().maxCoeff(), 0.0, 1e-15);
}

TEST(Logistic, SeparableBlobs) {
  const auto p = blobs(4, 150, 2, 4.0);
  const auto m = train_logistic(p.X, p.y);
  EXPECT_GE(accuracy(logistic_predict_rows(m, p.X), p.y), 0.95);
  EXPECT_GT(m.iterations, 0);
  const auto probs = logistic_predict_rows(m, p.X);
  EXPECT_LE((probs.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(Logistic, ConvexOptimumFromAnyStart) {
  const auto p = blobs(5, 60, 3, 1.0);
  LogisticConfig cfg;
  cfg.l2 = 0.1;
  cfg.tol = 1e-9;
  cfg.max_iter = 20000;
  const auto m = train_logistic(p.X, p.y, cfg);
  const double fitted = logistic_loss_grad(m.weights, m.bias, p.X, p.y, cfg.l2);
  // Long descent from a different start.
  Eigen::MatrixXd W = Eigen::MatrixXd::Constant(3, 3, 0.7);
  Eigen::VectorXd b = Eigen::VectorXd::Constant(3, -0.4);
  for (int it = 0; it < 40000; ++it) {
    Eigen::MatrixXd gW;
    Eigen::VectorXd gb;
    logistic_loss_grad(W, b, p.X, p.y, cfg.l2, &gW, &gb);
    W -= 0.1 * gW;
    b -= 0.1 * gb;
  }
  EXPECT_NEAR(fitted, logistic_loss_grad(W, b, p.X, p.y, cfg.l2), 1e-8);
}

TEST(Logistic, DivergenceIsReported) {
  auto p = blobs(6, 30, 2, 3.0);
  p.X *= 1e200;
  LogisticConfig cfg;
  cfg.lr = 1e10;
  EXPECT_THROW(train_logistic(p.X, p.y, cfg), DivergenceError);
}

TEST(Logistic, SerializationRoundTrip) {
  const auto p = blobs(7, 30, 3);
  auto m = train_logistic(p.X, p.y);
  m.feature_names = {"a", "b", "c"};
  m.schema_id = "fs-abc";
  m.scaler = fit_standardizer(p.X, "fs-abc");
  std::ostringstream os;
  write_linear_model(m, os);
  std::istringstream is(os.str());
  const auto back = read_linear_model(is);
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.bias, m.bias);
  ASSERT_TRUE(back.scaler);
  EXPECT_EQ(back.scaler->sd, m.scaler->sd);
  EXPECT_EQ(back.feature_names, m.feature_names);
}

// ---------------------------------------------------------------------------

TEST(Mlp, InitShapesAndRanges) {
  MlpConfig cfg;
  const auto m = init_mlp(9, cfg);
  EXPECT_EQ(m.layer_sizes(), (std::vector<int>{9, 128, 64, 3}));
  const double limit = std::sqrt(6.0 / 9.0);
  EXPECT_LE(m.layers[0].W.cwiseAbs().maxCoeff(), limit);
  EXPECT_TRUE(m.layers[0].b.isZero(0.0));
  EXPECT_EQ(init_mlp(9, cfg).layers[1].W, m.layers[1].W);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  const auto p = blobs(8, 5, 9, 1.0);
  MlpConfig cfg;
  auto m = init_mlp(9, cfg);
  Pcg32 rng(3);
  for (auto& l : m.layers) {
    for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b(i) = 0.05 * rng.normal();
  }
  const auto analytic = mlp_loss_grad(m, p.X, p.y);
  const auto loss = [&] { return mlp_loss_grad(m, p.X, p.y).loss; };
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    EXPECT_LT(block_error(m.layers[l].W, analytic.grads[l].W, loss), 1e-4) << "layer " << l;
    Eigen::MatrixXd bias = m.layers[l].b;
    const auto bias_loss = [&] {
      m.layers[l].b = bias.col(0);
      return mlp_loss_grad(m, p.X, p.y).loss;
    };
    EXPECT_LT(block_error(bias, analytic.grads[l].b, bias_loss), 1e-4) << "layer " << l;
    m.layers[l].b = bias.col(0);
  }
}

TEST(Mlp, GradientWithDropoutMasks) {
  const auto p = blobs(9, 5, 6, 1.0);
  MlpConfig cfg;
  cfg.hidden = {10, 7};
  auto m = init_mlp(6, cfg);
  Pcg32 rng(4);
  std::vector<Eigen::MatrixXd> masks;
  for (int width : cfg.hidden) {
    Eigen::MatrixXd mk(5, width);
    for (Eigen::Index i = 0; i < mk.size(); ++i) mk.data()[i] = rng.uniform() < 0.3 ? 0.0 : 1.0 / 0.7;
    masks.push_back(mk);
  }
  const auto analytic = mlp_loss_grad(m, p.X, p.y, &masks);
  const auto loss = [&] { return mlp_loss_grad(m, p.X, p.y, &masks).loss; };
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    EXPECT_LT(block_error(m.layers[l].W, analytic.grads[l].W, loss), 1e-4) << "layer " << l;
  }
}

TEST(Mlp, FitsSmallToySet) {
  const auto p = blobs(10, 30, 4, 2.5);
  MlpConfig cfg;
  cfg.dropout = 0.0;
  cfg.batch = 8;
  cfg.lr = 1e-2;
  cfg.patience = 100;
  const auto [m, log] = train_mlp(p.X, p.y, p.X, p.y, cfg);
  EXPECT_DOUBLE_EQ(accuracy(mlp_predict_rows(m, p.X), p.y), 1.0);
  EXPECT_LE(log.stopped_epoch, 99);
}

TEST(Mlp, EarlyStoppingRestoresBest) {
  auto tr = blobs(11, 60, 4, 3.0);
  auto va = tr;
  for (auto& y : va.y) y = (y + 1) % 3;  // validation disagrees with training
  MlpConfig cfg;
  cfg.patience = 0;
  cfg.lr = 1e-2;
  cfg.hidden = {16, 8};
  const auto [m, log] = train_mlp(tr.X, tr.y, va.X, va.y, cfg);
  // Patience 0: the first epoch that fails to improve ends training.
  ASSERT_GE(log.best_epoch, 0);
  EXPECT_EQ(log.stopped_epoch, log.best_epoch + 1);
  ASSERT_EQ(log.val_loss.size(), static_cast<std::size_t>(log.stopped_epoch + 1));
  EXPECT_GE(log.val_loss.back(), log.val_loss[static_cast<std::size_t>(log.best_epoch)]);
  for (int e = 1; e <= log.best_epoch; ++e) {
    EXPECT_LT(log.val_loss[static_cast<std::size_t>(e)], log.val_loss[static_cast<std::size_t>(e - 1)]);
  }
  EXPECT_LT(log.stopped_epoch, cfg.epochs - 1);
  EXPECT_NEAR(mlp_loss_grad(m, va.X, va.y).loss, log.val_loss[static_cast<std::size_t>(log.best_epoch)],
              1e-12);
}

TEST(Mlp, BestWeightsAreNeverWorseThanMinimum) {
  const auto tr = blobs(14, 45, 5, 1.0);
  const auto va = blobs(15, 30, 5, 1.0);
  MlpConfig cfg;
  cfg.epochs = 30;
  cfg.patience = 3;
  const auto [m, log] = train_mlp(tr.X, tr.y, va.X, va.y, cfg);
  const double best = *std::min_element(log.val_loss.begin(), log.val_loss.end());
  EXPECT_EQ(log.val_loss[static_cast<std::size_t>(log.best_epoch)], best);
  EXPECT_NEAR(mlp_loss_grad(m, va.X, va.y).loss, best, 1e-12);
}

TEST(Mlp, InferenceIsDeterministicAndNormalized) {
  const auto p = blobs(12, 12, 5);
  MlpConfig cfg;
  cfg.epochs = 3;
  const auto [m, log] = train_mlp(p.X, p.y, p.X, p.y, cfg);
  const auto a = mlp_predict_rows(m, p.X);
  EXPECT_EQ(a, mlp_predict_rows(m, p.X));
  EXPECT_LE((a.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
  MlpModel zero = m;
  for (auto& l : zero.layers) {
    l.W.setZero();
    l.b.setZero();
  }
  EXPECT_NEAR((mlp_predict_rows(zero, p.X).array() - 1.0 / 3.0).abs().maxCoeff(), 0.0, 1e-15);
}

TEST(Mlp, SameSeedSameModel) {
  const auto p = blobs(13, 30, 4);
  MlpConfig cfg;
  cfg.epochs = 5;
  const auto a = train_mlp(p.X, p.y, p.X, p.y, cfg).first;
  const auto b = train_mlp(p.X, p.y, p.X, p.y, cfg).first;
  std::ostringstream sa, sb;
  write_mlp_model(a, sa);
  write_mlp_model(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
  std::istringstream is(sa.str());
  const auto back = read_mlp_model(is);
  EXPECT_EQ(mlp_predict_rows(back, p.X), mlp_predict_rows(a, p.X));
}

TEST(Mlp, TrainLogCsv) {
  TrainLog log;
  log.train_loss = {1.0, 0.5};
  log.val_loss = {1.1, 0.6};
  log.val_acc = {0.4, 0.8};
  std::ostringstream os;
  write_train_log_csv(log, os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "epoch,train_loss,val_loss,val_acc");
}
