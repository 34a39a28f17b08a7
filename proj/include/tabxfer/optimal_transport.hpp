#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tabxfer/matrix.hpp"

namespace tabxfer {

// Joint coupling with prescribed marginals and its transport cost.
struct TransportPlan {
  Matrix coupling;
  std::vector<double> row_marginal;
  std::vector<double> col_marginal;
  double cost = 0.0;
  double epsilon = 0.0;
  int iterations_used = 0;
  // max |row/col sum - marginal| of the returned coupling
  double marginal_violation = 0.0;
  // row-marginal violation at each convergence check at the target epsilon
  std::vector<double> violation_checkpoints;
};

struct SinkhornOptions {
  double epsilon = 0.01;
  int max_iter = 5000;
  double tol = 1e-8;
  int check_every = 10;
  // Anneal epsilon geometrically from the cost scale down to `epsilon`,
  // warm-starting the dual potentials.
  bool epsilon_scaling = true;
};

// Entropic OT by log-domain alternating scaling of the dual potentials.
TransportPlan sinkhorn(const Matrix& cost, std::span<const double> row_marginal,
                       std::span<const double> col_marginal, const SinkhornOptions& options = {});

// Exact W1 between two empirical distributions on the line.
double wasserstein_1d(std::span<const double> a, std::span<const double> b);

struct PooledWassersteinOptions {
  SinkhornOptions sinkhorn;
  std::size_t row_cap = 512;
  std::uint64_t seed = 0;
};

// Euclidean-cost entropic W between point clouds (rows), uniform weights,
// each side subsampled to at most row_cap rows.
TransportPlan pooled_wasserstein_plan(const Matrix& source, const Matrix& target,
                                      const PooledWassersteinOptions& options = {});
double pooled_wasserstein(const Matrix& source, const Matrix& target,
                          const PooledWassersteinOptions& options = {});

// Seeded uniform subsample of row indices (sorted), or all rows when
// rows <= cap.
std::vector<std::size_t> subsample_rows(std::size_t rows, std::size_t cap, std::uint64_t seed);

}  // namespace tabxfer
