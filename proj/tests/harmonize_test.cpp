#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "support.hpp"
#include "tabxfer/assignment.hpp"
#include "tabxfer/error.hpp"
#include "tabxfer/harmonize.hpp"
#include "tabxfer/synthetic.hpp"

using namespace tabxfer;

namespace {

Matrix column(std::initializer_list<double> v) {
  Matrix m(v.size(), 1);
  std::copy(v.begin(), v.end(), m.data().begin());
  return m;
}

struct Dataset {
  DatasetCard card;
  LabeledTable table;
  Schema schema;
  TableView view() const { return {table, schema, card}; }
};

Dataset dataset(std::string id, Matrix x, std::vector<int> y, std::vector<std::string> names,
                std::vector<std::string> classes = {"0", "1"}) {
  Dataset d;
  d.card = synthetic::make_card(id, id, "", names, "label", classes);
  d.table = synthetic::make_table(std::move(x), std::move(y), names, d.card.class_labels.size(), id);
  d.schema = infer_schema(d.table, d.card);
  return d;
}

Dataset from_clone(const DatasetCard& card, const LabeledTable& table) {
  Dataset d{card, table, {}};
  d.schema = infer_schema(d.table, d.card);
  return d;
}

std::vector<int> labels_for(std::size_t n) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
  return y;
}

std::vector<int> target_to_source_of(const FeatureMapping& m) {
  std::vector<int> out(m.target_columns.size(), -1);
  for (const auto& p : m.assignment) out[p.target_column] = static_cast<int>(p.source_column);
  return out;
}

}  // namespace

TEST(Gram, SinglePointAndPair) {
  const Matrix one = gram_matrix(column({3.0}), KernelConfig::fixed(1.0));
  EXPECT_EQ(one(0, 0), 1.0);
  const Matrix two = gram_matrix(column({0.0, 1.0}), KernelConfig::fixed(1.0));
  EXPECT_NEAR(two(0, 1), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(two(0, 1), 0.3679, 1e-4);
}

TEST(Gram, ElementwiseAgainstDirectEvaluation) {
  Rng rng(3);
  const Matrix x = test::random_matrix(3, 4, rng);
  const Matrix k = gram_matrix(x, KernelConfig::fixed(0.7));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double d = 0;
      for (std::size_t c = 0; c < 4; ++c) d += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
      EXPECT_NEAR(k(i, j), std::exp(-0.7 * d), 1e-15);
    }
  }
}

TEST(Gram, SymmetricPositiveUnitDiagonal) {
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    const Matrix x = test::random_matrix(12, 3, rng, 3.0);
    const Matrix k = gram_matrix(x, KernelConfig{});
    for (std::size_t i = 0; i < 12; ++i) {
      EXPECT_EQ(k(i, i), 1.0);
      for (std::size_t j = 0; j < 12; ++j) {
        EXPECT_EQ(k(i, j), k(j, i));
        EXPECT_GT(k(i, j), 0.0);
      }
    }
  }
}

TEST(KernelDistance, HandExamples) {
  const auto g1 = KernelConfig::fixed(1.0);
  EXPECT_EQ(kernel_distance(column({0, 1}), column({0, 1}), g1), 0.0);
  EXPECT_EQ(kernel_distance(column({0}), column({5}), g1), 0.0);
  const double expected = std::sqrt(2.0 * std::pow(std::exp(-1.0) - std::exp(-4.0), 2));
  EXPECT_NEAR(kernel_distance(column({0, 1}), column({0, 2}), g1), expected, 1e-15);
  EXPECT_NEAR(expected, 0.49436, 1e-5);
}

TEST(KernelDistance, TermByTermOracleSymmetryAndDegeneracy) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 2 + rng.below(30), p = 1 + rng.below(5);
    const Matrix a = test::random_matrix(n, p, rng), b = test::random_matrix(n, p, rng, 1.7);
    const double gamma = rng.uniform(0.05, 2.0);
    const auto cfg = KernelConfig::fixed(gamma);
    EXPECT_NEAR(kernel_distance(a, b, cfg), oracle::kernel_distance_terms(a, b, gamma), 1e-10);
    EXPECT_EQ(kernel_distance(a, a, cfg), 0.0);
    EXPECT_NEAR(kernel_distance(a, b, cfg), kernel_distance(b, a, cfg), 1e-12);
    EXPECT_LE(kernel_distance(a, b, KernelConfig::fixed(1e-12)), 1e-9);
  }
}

TEST(KernelDistance, Errors) {
  try {
    kernel_distance(column({0, 1}), column({0, 1, 2}), KernelConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SizeMismatch);
  }
  try {
    kernel_distance(column({0, NAN}), column({0, 1}), KernelConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteInput);
  }
}

TEST(KernelDistance, MedianHeuristicBandwidth) {
  // Pairwise distances of {0, 1, 3}: 1, 3, 2, median 2, so gamma = 1 / (2 * 4).
  EXPECT_DOUBLE_EQ(median_heuristic_gamma(column({0, 1, 3})), 1.0 / 8.0);
  EXPECT_EQ(median_heuristic_gamma(column({2, 2, 2})), 1.0);
}

TEST(Quantile, IdentityHandExampleConstantAndMonotone) {
  Rng rng(6);
  std::vector<double> s(50);
  for (auto& x : s) x = rng.normal();
  const auto same = quantile_transform(s, s);
  for (double x : s) EXPECT_NEAR(same.apply(x), x, 1e-9);

  const auto map = quantile_transform(std::vector<double>{1, 2, 3}, std::vector<double>{10, 20, 30});
  EXPECT_NEAR(map.apply(1), 10, 1e-12);
  EXPECT_NEAR(map.apply(2), 20, 1e-12);
  EXPECT_NEAR(map.apply(3), 30, 1e-12);

  const auto flat = quantile_transform(std::vector<double>{1, 2, 3}, std::vector<double>{5, 5, 5});
  for (double x : {-10.0, 1.0, 2.5, 3.0, 40.0}) EXPECT_EQ(flat.apply(x), 5.0);

  std::vector<double> t(80);
  for (auto& x : t) x = rng.gamma(1.5) * 3.0;
  const auto mono = quantile_transform(s, t);
  EXPECT_TRUE(mono.monotone());
  double prev = -INFINITY;
  for (double u = -4; u <= 4; u += 0.01) {
    const double v = mono.apply(u);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(ClassAlign, IdentityHintsAndNearest) {
  const auto x = column({0, 1, 2, 3, 4, 5});
  const auto same = dataset("a", x, {0, 1, 0, 1, 0, 1}, {"f"}, {"yes", "no"});
  const auto id = class_align(same.view(), same.view(), {});
  EXPECT_EQ(id.source_to_target, (std::vector<int>{0, 1}));

  const auto s = dataset("s", x, {0, 1, 0, 1, 0, 1}, {"f"}, {"malignant", "benign"});
  const auto t = dataset("t", x, {0, 1, 0, 1, 0, 1}, {"f"}, {"M", "B"});
  MappingHints hints;
  hints.class_pairs = {{"malignant", "M", 1.0}, {"benign", "B", 1.0}};
  const auto hinted = class_align(s.view(), t.view(), hints);
  EXPECT_EQ(hinted.source_to_target, (std::vector<int>{0, 1}));
  EXPECT_EQ(hinted.method[0], "hint");

  // "very high" is the orphan; its label embedding is closer to "high".
  const auto s3 = dataset("s3", x, {0, 1, 2, 0, 1, 2}, {"f"}, {"low", "high", "very high"});
  const auto t2 = dataset("t2", x, {0, 1, 0, 1, 0, 1}, {"f"}, {"low", "high"});
  const auto e = [](const char* w) { return oracle::hashed_tf_embedding(w, 4096); };
  ASSERT_GT(oracle::cosine(e("very high"), e("high")), oracle::cosine(e("very high"), e("low")));
  const auto surj = class_align(s3.view(), t2.view(), {});
  EXPECT_EQ(surj.source_to_target, (std::vector<int>{0, 1, 1}));
  EXPECT_TRUE(surj.class_count_mismatch);
}

TEST(MappingSearch, RowShuffledCopyIsIdentity) {
  Rng rng(7);
  const Matrix x = test::random_matrix(150, 4, rng);
  std::vector<std::size_t> perm(150);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::size_t>(perm));
  const auto t = dataset("t", x, labels_for(150), {"age", "height", "weight", "income"});
  const auto s = dataset("s", x.select_rows(perm), labels_for(150), {"age", "height", "weight", "income"});
  const auto m = search_feature_mapping(s.view(), t.view(), {}, KernelConfig{}, {});
  EXPECT_EQ(target_to_source_of(m), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_LE(m.kernel_distance, 1e-6);
}

// Oracle: score all 24 permutations of the obfuscated 4-column clone with
// standardizing transforms; the true one must be the unique minimizer and
// the search must return it.
TEST(MappingSearch, ObfuscatedPermutationMatchesBruteForce) {
  const auto c = synthetic::make_permuted_clone(17, 4, 200);
  const auto s = from_clone(c.source_card, c.source), t = from_clone(c.target_card, c.target);
  const auto m = search_feature_mapping(s.view(), t.view(), {}, KernelConfig{}, {});
  std::vector<int> perm = {0, 1, 2, 3}, best;
  double best_d = INFINITY;
  do {
    const auto candidate = mapping_for_assignment(s.view(), t.view(), perm);
    const double d =
        oracle::sorted_pairing_distance(apply_affine_mapping(candidate, c.source.features), c.target.features, m.gamma);
    if (d < best_d) {
      best_d = d;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_EQ(best, c.target_to_source);
  EXPECT_EQ(target_to_source_of(m), c.target_to_source);
}

// Columns 4 and 5 of the source are noise with no counterpart in the target.
TEST(MappingSearch, WiderSourceLeavesSurplusUnmatched) {
  Rng rng(8);
  const Matrix x = test::random_matrix(120, 4, rng);
  Matrix wide(120, 6);
  for (std::size_t i = 0; i < 120; ++i) {
    for (std::size_t j = 0; j < 4; ++j) wide(i, j) = x(i, j);
    wide(i, 4) = rng.gamma(1.0) * 50.0;
    wide(i, 5) = rng.uniform(1000, 2000);
  }
  const auto t = dataset("t", x, labels_for(120), {"age", "height", "weight", "income"});
  const auto s = dataset("s", wide, labels_for(120), {"age", "height", "weight", "income", "zip", "account"});
  const auto m = search_feature_mapping(s.view(), t.view(), {}, KernelConfig{}, {});
  EXPECT_EQ(m.assignment.size(), 4u);
  EXPECT_EQ(target_to_source_of(m), (std::vector<int>{0, 1, 2, 3}));
  std::vector<std::size_t> unmatched = m.unmatched_source_columns;
  std::sort(unmatched.begin(), unmatched.end());
  EXPECT_EQ(unmatched, (std::vector<std::size_t>{4, 5}));

  const auto classes = class_align(s.view(), t.view(), {});
  const auto [out, report] = harmonize_dataset(s.view(), t.view(), m, classes, {});
  EXPECT_EQ(out.cols(), 4u);
  EXPECT_EQ(out.column_names, t.table.column_names);
}

// For every clone instance the chosen mapping attains the minimum kernel
// distance over all permutations with standardizing transforms.
TEST(MappingSearch, BruteForceEquivalenceOnClones) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t p = 3 + seed % 4;
    const auto c = synthetic::make_permuted_clone(100 + seed, p, 150);
    const auto s = from_clone(c.source_card, c.source), t = from_clone(c.target_card, c.target);
    MappingSearchOptions o;
    o.seed = seed;
    const auto m = search_feature_mapping(s.view(), t.view(), {}, KernelConfig{}, o);
    const auto score = [&](const std::vector<int>& perm) {
      const auto cand = mapping_for_assignment(s.view(), t.view(), perm);
      return oracle::sorted_pairing_distance(apply_affine_mapping(cand, c.source.features), c.target.features, m.gamma);
    };
    std::vector<int> perm(p);
    std::iota(perm.begin(), perm.end(), 0);
    double best = INFINITY;
    do best = std::min(best, score(perm));
    while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_LE(score(target_to_source_of(m)), best + 1e-9) << "seed " << seed;
  }
}

TEST(Harmonize, AlreadyHarmonizedIsUnchanged) {
  Rng rng(9);
  const Matrix x = test::random_matrix(100, 3, rng);
  const auto t = dataset("t", x, labels_for(100), {"a_len", "b_wid", "c_hgt"});
  const auto s = dataset("s", x, labels_for(100), {"a_len", "b_wid", "c_hgt"});
  const auto m = search_feature_mapping(s.view(), t.view(), {}, KernelConfig{}, {});
  const auto [out, report] = harmonize_dataset(s.view(), t.view(), m, class_align(s.view(), t.view(), {}), {});
  for (std::size_t i = 0; i < x.data().size(); ++i) EXPECT_NEAR(out.features.data()[i], x.data()[i], 1e-9);
  EXPECT_EQ(out.labels, s.table.labels);
  EXPECT_LE(report.kernel_distance_after, 1e-6);
  for (double w : report.per_feature_w1_after) EXPECT_LE(w, 1e-9);
}

TEST(Harmonize, CloneW1DropsOnEveryColumn) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto c = synthetic::make_permuted_clone(seed, 5, 250);
    const auto s = from_clone(c.source_card, c.source), t = from_clone(c.target_card, c.target);
    const auto m = search_feature_mapping(s.view(), t.view(), {}, KernelConfig{}, {});
    const auto [out, report] = harmonize_dataset(s.view(), t.view(), m, class_align(s.view(), t.view(), {}), {});
    ASSERT_EQ(report.per_feature_w1_after.size(), 5u);
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_LE(report.per_feature_w1_after[j], 0.05 * report.per_feature_w1_before[j]) << "seed " << seed << " col " << j;
    }
  }
}

TEST(Harmonize, MappingFileRoundTrip) {
  const auto c = synthetic::make_permuted_clone(4, 4, 120);
  const auto s = from_clone(c.source_card, c.source), t = from_clone(c.target_card, c.target);
  const auto m = search_feature_mapping(s.view(), t.view(), {}, KernelConfig{}, {});
  const auto classes = class_align(s.view(), t.view(), {});
  const auto [parsed, parsed_classes] = parse_mapping(serialize_mapping(m, classes));
  EXPECT_EQ(parsed, m);
  EXPECT_EQ(parsed_classes, classes);
  try {
    parse_mapping("source_card = x\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
}

TEST(Harmonize, NoFeasibleMappingBetweenIncompatibleKinds) {
  const auto t = dataset("t", column({0.1, 0.5, 2.0, 3.5}), {0, 1, 0, 1}, {"level"});
  Dataset s;
  s.card = synthetic::make_card("s", "s", "", {"color"}, "label", {"0", "1"});
  s.table = synthetic::make_table(column({0, 1, 0, 1}), {0, 1, 0, 1}, {"color"}, 2, "s");
  s.table.column_kinds = {ColumnKind::CategoricalEncoded};
  s.table.categories = {{"red", "blue"}};
  s.schema = infer_schema(s.table, s.card);
  try {
    search_feature_mapping(s.view(), t.view(), {}, KernelConfig{}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoFeasibleMapping);
  }
}
