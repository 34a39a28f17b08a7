#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "tabxfer/kernels.hpp"
#include "tabxfer/matrix.hpp"
#include "tabxfer/random.hpp"

using namespace tabxfer;

namespace {

Matrix random_points(std::size_t n, std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) m(i, j) = rng.normal();
  }
  return m;
}

template <bool Parallel>
void BM_GramDiscrepancy(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_points(n, 6, 1), b = random_points(n, 6, 2);
  for (auto _ : state) {
    const double d = Parallel ? kernels::gram_discrepancy(a, b, 0.1) : kernels::serial::gram_discrepancy(a, b, 0.1);
    benchmark::DoNotOptimize(d);
  }
}

template <bool Parallel>
void BM_EuclideanDistances(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_points(n, 6, 3), b = random_points(n, 6, 4);
  for (auto _ : state) {
    Matrix d = Parallel ? kernels::euclidean_distances(a, b) : kernels::serial::euclidean_distances(a, b);
    benchmark::DoNotOptimize(d);
  }
}

template <bool Parallel>
void BM_CosineScores(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix v = random_points(n, 4096, 5);
  std::vector<double> norms(n), query(4096, 0.01);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < v.cols(); ++j) s += v(i, j) * v(i, j);
    norms[i] = std::sqrt(s);
  }
  const double qn = std::sqrt(4096 * 0.0001);
  for (auto _ : state) {
    auto s = Parallel ? kernels::cosine_scores(v, norms, query, qn) : kernels::serial::cosine_scores(v, norms, query, qn);
    benchmark::DoNotOptimize(s);
  }
}

template <bool Parallel>
void BM_LogSumExpRows(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix cost = kernels::euclidean_distances(random_points(n, 6, 6), random_points(n, 6, 7));
  std::vector<double> potential(n, 0.0), out(n);
  for (auto _ : state) {
    if (Parallel) {
      kernels::log_sum_exp_rows(cost, potential, 0.01, out);
    } else {
      kernels::serial::log_sum_exp_rows(cost, potential, 0.01, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_GramDiscrepancy<true>)->Name("gram_discrepancy/openmp")->Arg(256)->Arg(512)->Arg(1024);
BENCHMARK(BM_GramDiscrepancy<false>)->Name("gram_discrepancy/serial")->Arg(256)->Arg(512)->Arg(1024);
BENCHMARK(BM_EuclideanDistances<true>)->Name("euclidean_distances/openmp")->Arg(512)->Arg(1024);
BENCHMARK(BM_EuclideanDistances<false>)->Name("euclidean_distances/serial")->Arg(512)->Arg(1024);
BENCHMARK(BM_CosineScores<true>)->Name("cosine_scores/openmp")->Arg(100)->Arg(1000);
BENCHMARK(BM_CosineScores<false>)->Name("cosine_scores/serial")->Arg(100)->Arg(1000);
BENCHMARK(BM_LogSumExpRows<true>)->Name("log_sum_exp_rows/openmp")->Arg(512);
BENCHMARK(BM_LogSumExpRows<false>)->Name("log_sum_exp_rows/serial")->Arg(512);

BENCHMARK_MAIN();
