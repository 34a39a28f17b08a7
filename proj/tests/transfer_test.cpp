#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "tabxfer/error.hpp"
#include "tabxfer/synthetic.hpp"
#include "tabxfer/transfer.hpp"

using namespace tabxfer;

namespace {

LabeledTable table_from(Matrix x, std::vector<int> y, std::size_t classes) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < x.cols(); ++j) names.push_back("f" + std::to_string(j));
  return synthetic::make_table(std::move(x), std::move(y), names, classes, "t");
}

LabeledTable separable(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, 2);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    x(i, 0) = rng.normal() + (label ? 3.0 : -3.0);
    x(i, 1) = rng.normal();
    y[i] = label;
  }
  return table_from(std::move(x), std::move(y), 2);
}

Batch random_batch(std::size_t n, std::size_t p, std::size_t classes, Rng& rng) {
  Batch b{test::random_matrix(n, p, rng), {}};
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(rng.below(classes)));
  return b;
}

}  // namespace

TEST(Model, SameSeedSameParameters) {
  TransferConfig c;
  c.seed = 4;
  EXPECT_EQ(init_model(5, 3, c), init_model(5, 3, c));
}

TEST(Model, Shapes) {
  TransferConfig c;
  const auto logistic = init_model(3, 2, c);
  EXPECT_EQ(logistic.w1.rows(), 3u);
  EXPECT_EQ(logistic.w1.cols(), 2u);
  EXPECT_EQ(logistic.b1.size(), 2u);
  c.learner = LearnerKind::Mlp;
  c.hidden_width = 32;
  const auto mlp = init_model(5, 3, c);
  EXPECT_EQ(mlp.parameter_count(), 5u * 32 + 32 + 32 * 3 + 3);
  EXPECT_EQ(mlp.parameter_count(), 291u);
  EXPECT_EQ(mlp.flatten().size(), 291u);
}

TEST(Loss, AlphaEndpointsAndMidpoint) {
  Rng rng(1);
  TransferConfig c;
  const auto m = init_model(3, 2, c);
  const Batch s = random_batch(10, 3, 2, rng), t = random_batch(7, 3, 2, rng);
  EXPECT_EQ(weighted_loss(m, s, t, 0.0), cross_entropy(m, t));
  EXPECT_EQ(weighted_loss(m, s, t, 1.0), cross_entropy(m, s));
  const double ls = cross_entropy(m, s), lt = cross_entropy(m, t);
  for (double a : {0.1, 0.5, 0.9}) EXPECT_NEAR(weighted_loss(m, s, t, a), a * ls + (1 - a) * lt, 1e-15);
}

// One feature, weight 1 on class 1 only: the logit gap is x, so a class-0
// row at x = ln(e^k - 1) has loss ln(1 + e^x) = k.
TEST(Loss, HalfWeightAveragesBatchLosses) {
  ModelParams m = init_model(1, 2, TransferConfig{});
  m.w1(0, 0) = 0.0;
  m.w1(0, 1) = 1.0;
  m.b1 = {0.0, 0.0};
  const Batch two{Matrix(1, 1, std::log(std::exp(2.0) - 1.0)), {0}};
  const Batch four{Matrix(1, 1, std::log(std::exp(4.0) - 1.0)), {0}};
  EXPECT_NEAR(cross_entropy(m, two), 2.0, 1e-12);
  EXPECT_NEAR(cross_entropy(m, four), 4.0, 1e-12);
  EXPECT_NEAR(weighted_loss(m, two, four, 0.5), 3.0, 1e-12);
}

TEST(Loss, EmptyWeightedBatchAndLabelChecks) {
  const auto m = init_model(2, 2, TransferConfig{});
  Rng rng(2);
  const Batch full = random_batch(4, 2, 2, rng);
  const Batch empty{Matrix(0, 2), {}};
  EXPECT_NO_THROW(weighted_loss(m, empty, full, 0.0));
  try {
    weighted_loss(m, empty, full, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyWeightedBatch);
  }
}

TEST(Loss, AffineInAlpha) {
  Rng rng(3);
  TransferConfig c;
  c.learner = LearnerKind::Mlp;
  c.hidden_width = 8;
  const auto m = init_model(4, 3, c);
  const Batch s = random_batch(9, 4, 3, rng), t = random_batch(5, 4, 3, rng);
  const double l0 = weighted_loss(m, s, t, 0.0), l1 = weighted_loss(m, s, t, 1.0);
  for (double a = 0.0; a <= 1.0; a += 0.125) EXPECT_EQ(weighted_loss(m, s, t, a), a * l1 + (1 - a) * l0);
}

// Zero weights: softmax is uniform, so d/db_c = mean(1/C - [y = c]) and
// d/dW_jc = mean(x_j (1/C - [y = c])).
TEST(Gradient, ClosedFormAtZeroWeights) {
  Rng rng(4);
  ModelParams m = init_model(3, 2, TransferConfig{});
  std::fill(m.w1.data().begin(), m.w1.data().end(), 0.0);
  Batch t = random_batch(8, 3, 2, rng);
  t.labels = {0, 1, 0, 1, 1, 0, 1, 0};
  const auto g = gradient(m, Batch{Matrix(0, 3), {}}, t, 0.0);
  EXPECT_NEAR(g.b1[0], 0.0, 1e-15);
  EXPECT_NEAR(g.b1[1], 0.0, 1e-15);
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t c = 0; c < 2; ++c) {
      double expected = 0.0;
      for (std::size_t i = 0; i < 8; ++i) expected += t.features(i, j) * (0.5 - (t.labels[i] == static_cast<int>(c)));
      EXPECT_NEAR(g.w1(j, c), expected / 8.0, 1e-15);
    }
  }
}

TEST(Gradient, FiniteDifferencesEveryParameter) {
  for (LearnerKind kind : {LearnerKind::Logistic, LearnerKind::Mlp}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(seed + 50);
      TransferConfig c;
      c.seed = seed;
      c.learner = kind;
      c.hidden_width = 6;
      ModelParams m = init_model(4, 3, c);
      for (auto& b : m.b1) b = 0.1 * rng.normal();
      const Batch s = random_batch(8, 4, 3, rng), t = random_batch(8, 4, 3, rng);
      const double alpha = 0.3;
      const auto analytic = gradient(m, s, t, alpha).flatten();
      auto theta = m.flatten();
      for (std::size_t k = 0; k < theta.size(); ++k) {
        const double saved = theta[k];
        theta[k] = saved + 1e-5;
        m.assign(theta);
        const double up = weighted_loss(m, s, t, alpha);
        theta[k] = saved - 1e-5;
        m.assign(theta);
        const double down = weighted_loss(m, s, t, alpha);
        theta[k] = saved;
        m.assign(theta);
        const double numeric = (up - down) / 2e-5;
        const double rel = std::abs(numeric - analytic[k]) / std::max({std::abs(numeric), std::abs(analytic[k]), 1e-6});
        EXPECT_LE(rel, 1e-4) << to_string(kind) << " seed " << seed << " param " << k;
      }
    }
  }
}

TEST(Gradient, AlphaZeroIsTargetOnly) {
  Rng rng(5);
  const auto m = init_model(3, 2, TransferConfig{});
  const Batch s = random_batch(6, 3, 2, rng), t = random_batch(6, 3, 2, rng);
  EXPECT_EQ(gradient(m, s, t, 0.0), gradient(m, Batch{Matrix(0, 3), {}}, t, 0.0));
}

TEST(Metrics, HandComputedConfusion) {
  const std::vector<int> y = {1, 1, 0, 0}, yhat = {1, 0, 0, 0};
  const auto r = metrics_from_predictions(y, yhat, 2);
  EXPECT_EQ(r.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(r.per_class[1].f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.per_class[0].f1, 0.8);
  EXPECT_DOUBLE_EQ(r.macro_f1, (0.8 + 2.0 / 3.0) / 2.0);
  EXPECT_NEAR(r.macro_f1, 0.7333, 1e-4);
  EXPECT_EQ(r.confusion, (std::vector<std::vector<std::size_t>>{{2, 0}, {1, 1}}));
}

TEST(Metrics, DegenerateCases) {
  const std::vector<int> y = {0, 1, 1, 0, 1};
  const auto perfect = metrics_from_predictions(y, y, 2);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.macro_precision, 1.0);
  EXPECT_EQ(perfect.macro_recall, 1.0);
  EXPECT_EQ(perfect.macro_f1, 1.0);
  const std::vector<int> ones(5, 1);
  const auto one_class = metrics_from_predictions(y, ones, 2);
  EXPECT_EQ(one_class.per_class[1].recall, 1.0);
  EXPECT_EQ(one_class.per_class[0].recall, 0.0);
  EXPECT_EQ(one_class.per_class[0].precision, 0.0);
  EXPECT_EQ(one_class.macro_recall, 0.5);
}

TEST(Metrics, MacroF1RecomputedFromConfusion) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 2 + rng.below(3);
    std::vector<int> y(40), yhat(40);
    for (auto& v : y) v = static_cast<int>(rng.below(k));
    for (auto& v : yhat) v = static_cast<int>(rng.below(k));
    const auto r = metrics_from_predictions(y, yhat, k);
    double f1 = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double tp = static_cast<double>(r.confusion[c][c]), pred = 0, truth = 0;
      for (std::size_t o = 0; o < k; ++o) {
        pred += static_cast<double>(r.confusion[o][c]);
        truth += static_cast<double>(r.confusion[c][o]);
      }
      const double p = pred ? tp / pred : 0.0, rc = truth ? tp / truth : 0.0;
      f1 += (p + rc) > 0 ? 2 * p * rc / (p + rc) : 0.0;
    }
    EXPECT_NEAR(r.macro_f1, f1 / static_cast<double>(k), 1e-12);
  }
}

TEST(Metrics, LabelSpaceMismatch) {
  const auto m = init_model(2, 3, TransferConfig{});
  try {
    evaluate(m, separable(10, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LabelSpaceMismatch);
  }
}

TEST(Train, AlphaZeroEqualsTargetOnlyRun) {
  const auto target = separable(80, 2);
  const auto split = split_holdout(target, 0.25, 1);
  const auto source = separable(300, 3);
  TransferConfig c;
  c.alpha = 0.0;
  c.seed = 9;
  c.max_epochs = 30;
  const auto with_source = train(source, split.train, split.holdout, c);
  const auto alone = train(source.select_rows({}), split.train, split.holdout, c);
  EXPECT_EQ(with_source.log, alone.log);
  EXPECT_EQ(with_source.model, alone.model);
}

TEST(Train, SeparableDataIsFit) {
  const auto target = separable(200, 4);
  TransferConfig c;
  c.alpha = 0.0;
  c.max_epochs = 100;
  c.patience = 100;
  const auto r = train(target.select_rows({}), target, target, c);
  EXPECT_GE(evaluate(r.model, target).accuracy, 0.99);
}

TEST(Train, PatienceStopsAfterBestPlusPatience) {
  const auto target = separable(60, 5);
  const auto split = split_holdout(target, 0.25, 2);
  TransferConfig c;
  c.alpha = 0.0;
  c.patience = 3;
  TrainHooks hooks;
  hooks.on_gradient = [](ModelParams& g) {
    auto zero = g.flatten();
    std::fill(zero.begin(), zero.end(), 0.0);
    g.assign(zero);
  };
  const auto r = train(target.select_rows({}), split.train, split.holdout, c, hooks);
  EXPECT_EQ(r.log.epochs.size(), 4u);
  EXPECT_TRUE(r.log.stopped_early);
  EXPECT_EQ(r.log.best_epoch, r.log.epochs.front().epoch);
}

TEST(Train, DeterministicAndNeverWorseThanBest) {
  const auto task = synthetic::make_shifted_domain_task({.seed = 3});
  const auto split = split_holdout(task.target_labeled, 0.2, 3);
  for (LearnerKind kind : {LearnerKind::Logistic, LearnerKind::Mlp}) {
    TransferConfig c;
    c.seed = 1;
    c.learner = kind;
    c.max_epochs = 40;
    c.alpha = 0.0;
    const auto a = train(task.source.select_rows({}), split.train, split.holdout, c);
    const auto b = train(task.source.select_rows({}), split.train, split.holdout, c);
    EXPECT_EQ(a.log, b.log);
    EXPECT_EQ(evaluate(a.model, task.target_test), evaluate(b.model, task.target_test));
    double best = 0.0;
    for (const auto& e : a.log.epochs) best = std::max(best, e.val_macro_f1);
    EXPECT_EQ(evaluate(a.model, split.holdout).macro_f1, best);
  }
}

TEST(Sweep, GridZeroAndDuplicates) {
  const auto target = separable(60, 6);
  const auto split = split_holdout(target, 0.25, 3);
  const auto source = separable(200, 7);
  TransferConfig c;
  c.max_epochs = 20;
  const std::vector<double> zero = {0.0};
  const auto single = alpha_sweep(source, split.train, split.holdout, zero, c);
  ASSERT_EQ(single.entries.size(), 1u);
  TransferConfig alone = c;
  alone.alpha = 0.0;
  const auto ref = train(source.select_rows({}), split.train, split.holdout, alone);
  EXPECT_EQ(single.entries[0].log, ref.log);

  const std::vector<double> dup = {0.5, 0.25, 0.5};
  const auto d = alpha_sweep(source, split.train, split.holdout, dup, c);
  EXPECT_EQ(d.entries[0], d.entries[2]);
}

TEST(Config, PatienceBounds) {
  TransferConfig c;
  c.patience = 0;
  EXPECT_THROW(c.validate(), Error);
  c.patience = 101;
  EXPECT_THROW(c.validate(), Error);
}
