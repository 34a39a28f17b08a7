#include <gtest/gtest.h>

#include <omp.h>

#include <cmath>

#include "support.hpp"
#include "tabxfer/assignment.hpp"
#include "tabxfer/kernels.hpp"

using namespace tabxfer;

namespace {

// Runs f under several OpenMP team sizes, so the parallel kernels really
// split their loops even on a single-core machine.
template <typename F>
void for_thread_counts(F f) {
  const int saved = omp_get_max_threads();
  for (int threads : {1, 3, 8}) {
    omp_set_num_threads(threads);
    f(threads);
  }
  omp_set_num_threads(saved);
}

}  // namespace

TEST(Kernels, GaussianGramMatchesSerial) {
  Rng rng(1);
  const Matrix x = test::random_matrix(97, 5, rng);
  const Matrix ref = kernels::serial::gaussian_gram(x, 0.3);
  for_thread_counts([&](int t) { EXPECT_EQ(kernels::gaussian_gram(x, 0.3), ref) << t << " threads"; });
}

TEST(Kernels, GramDiscrepancyMatchesSerial) {
  Rng rng(2);
  const Matrix a = test::random_matrix(120, 4, rng), b = test::random_matrix(120, 4, rng, 2.0);
  const double ref = kernels::serial::gram_discrepancy(a, b, 0.2);
  for_thread_counts([&](int t) { EXPECT_EQ(kernels::gram_discrepancy(a, b, 0.2), ref) << t << " threads"; });
}

TEST(Kernels, DistancesMatchSerial) {
  Rng rng(3);
  const Matrix a = test::random_matrix(64, 6, rng), b = test::random_matrix(41, 6, rng);
  const Matrix ref = kernels::serial::euclidean_distances(a, b);
  const auto cref = kernels::serial::condensed_distances(a);
  ASSERT_EQ(cref.size(), 64u * 63u / 2u);
  for_thread_counts([&](int) {
    EXPECT_EQ(kernels::euclidean_distances(a, b), ref);
    EXPECT_EQ(kernels::condensed_distances(a), cref);
  });
  EXPECT_NEAR(ref(0, 0), std::sqrt([&] {
                double s = 0;
                for (std::size_t c = 0; c < 6; ++c) s += (a(0, c) - b(0, c)) * (a(0, c) - b(0, c));
                return s;
              }()),
              1e-12);
}

TEST(Kernels, CosineScoresMatchSerial) {
  Rng rng(4);
  const Matrix v = test::random_matrix(300, 32, rng);
  std::vector<double> norms(300), q(32);
  for (std::size_t i = 0; i < 300; ++i) {
    double s = 0;
    for (double x : v.row(i)) s += x * x;
    norms[i] = std::sqrt(s);
  }
  norms[7] = 0.0;
  double qn = 0;
  for (auto& x : q) {
    x = rng.normal();
    qn += x * x;
  }
  qn = std::sqrt(qn);
  const auto ref = kernels::serial::cosine_scores(v, norms, q, qn);
  EXPECT_EQ(ref[7], 0.0);
  for_thread_counts([&](int) { EXPECT_EQ(kernels::cosine_scores(v, norms, q, qn), ref); });
}

TEST(Kernels, LogSumExpMatchesSerial) {
  Rng rng(5);
  const Matrix cost = kernels::serial::euclidean_distances(test::random_matrix(50, 3, rng), test::random_matrix(70, 3, rng));
  std::vector<double> potential(70), ref(50), out(50);
  for (auto& p : potential) p = rng.normal();
  kernels::serial::log_sum_exp_rows(cost, potential, 0.05, ref);
  for_thread_counts([&](int) {
    kernels::log_sum_exp_rows(cost, potential, 0.05, out);
    EXPECT_EQ(out, ref);
  });
  double direct = 0.0;
  for (std::size_t j = 0; j < 70; ++j) direct += std::exp((potential[j] - cost(0, j)) / 0.05);
  EXPECT_NEAR(ref[0], std::log(direct), 1e-9);
}

TEST(Assignment, HungarianAgreesWithExhaustive) {
  Rng rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t r = 1 + rng.below(6), c = 1 + rng.below(6);
    const Matrix score = test::random_matrix(r, c, rng);
    const auto h = solve_assignment_hungarian(score), e = solve_assignment_exhaustive(score);
    EXPECT_NEAR(assignment_score(score, h), assignment_score(score, e), 1e-12) << r << "x" << c;
  }
}
