#include "tabxfer/optimal_transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tabxfer/error.hpp"
#include "tabxfer/kernels.hpp"
#include "tabxfer/random.hpp"

namespace tabxfer {
namespace {

Matrix transposed(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  }
  return t;
}

void check_marginal(std::span<const double> w, const char* which) {
  double sum = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      raise(ErrorCode::InvalidArgument, std::string(which) + " marginal has a negative or non-finite entry");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    raise(ErrorCode::InvalidArgument, std::string(which) + " marginal does not sum to 1");
  }
}

std::vector<double> scaled_log(std::span<const double> w) {
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    out[i] = w[i] > 0.0 ? std::log(w[i]) : -std::numeric_limits<double>::infinity();
  }
  return out;
}

// One dual update: potential_i = eps * (log w_i - LSE_j((other_j - C_ij) / eps)).
void update_potential(const Matrix& cost, std::span<const double> other, double eps,
                      std::span<const double> log_weights, std::span<double> potential,
                      std::vector<double>& scratch) {
  kernels::log_sum_exp_rows(cost, other, eps, scratch);
  for (std::size_t i = 0; i < potential.size(); ++i) {
    potential[i] = std::isinf(log_weights[i]) ? -std::numeric_limits<double>::infinity()
                                              : eps * (log_weights[i] - scratch[i]);
    if (std::isnan(potential[i])) {
      raise(ErrorCode::NumericalUnderflow, "sinkhorn potentials became NaN; raise epsilon");
    }
  }
}

double row_violation(const Matrix& cost, std::span<const double> f, std::span<const double> g,
                     double eps, std::span<const double> weights, std::vector<double>& scratch) {
  kernels::log_sum_exp_rows(cost, g, eps, scratch);
  double worst = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double mass = std::isinf(f[i]) ? 0.0 : std::exp(f[i] / eps + scratch[i]);
    worst = std::max(worst, std::abs(mass - weights[i]));
  }
  return worst;
}

}  // namespace

TransportPlan sinkhorn(const Matrix& cost, std::span<const double> row_marginal,
                       std::span<const double> col_marginal, const SinkhornOptions& options) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  if (n == 0 || m == 0) raise(ErrorCode::InvalidArgument, "sinkhorn needs a nonempty cost matrix");
  if (row_marginal.size() != n || col_marginal.size() != m) {
    raise(ErrorCode::SizeMismatch, "marginal lengths do not match the cost matrix");
  }
  if (!(options.epsilon > 0.0)) raise(ErrorCode::InvalidArgument, "epsilon must be positive");
  if (options.max_iter < 1 || options.check_every < 1) {
    raise(ErrorCode::InvalidArgument, "max_iter and check_every must be positive");
  }
  check_marginal(row_marginal, "row");
  check_marginal(col_marginal, "column");
  double max_cost = 0.0;
  for (double c : cost.data()) {
    if (!std::isfinite(c)) raise(ErrorCode::NonFiniteInput, "sinkhorn cost has a non-finite entry");
    if (c < 0.0) raise(ErrorCode::InvalidArgument, "sinkhorn cost must be nonnegative");
    max_cost = std::max(max_cost, c);
  }

  const Matrix cost_t = transposed(cost);
  const auto log_a = scaled_log(row_marginal);
  const auto log_b = scaled_log(col_marginal);
  std::vector<double> f(n, 0.0), g(m, 0.0), scratch_n(n), scratch_m(m);

  TransportPlan plan;
  plan.epsilon = options.epsilon;
  int iterations = 0;

  if (options.epsilon_scaling) {
    // warm-up stages at eps = max_cost / 2^k until the target is reached
    constexpr int kStageIterations = 20;
    for (double eps = max_cost; eps > options.epsilon && iterations < options.max_iter; eps *= 0.5) {
      for (int it = 0; it < kStageIterations && iterations < options.max_iter; ++it, ++iterations) {
        update_potential(cost, g, eps, log_a, f, scratch_n);
        update_potential(cost_t, f, eps, log_b, g, scratch_m);
      }
    }
  }

  const double eps = options.epsilon;
  while (iterations < options.max_iter) {
    update_potential(cost, g, eps, log_a, f, scratch_n);
    update_potential(cost_t, f, eps, log_b, g, scratch_m);
    ++iterations;
    if (iterations % options.check_every == 0 || iterations == options.max_iter) {
      const double violation = row_violation(cost, f, g, eps, row_marginal, scratch_n);
      plan.violation_checkpoints.push_back(violation);
      if (violation < options.tol) break;
    }
  }
  plan.iterations_used = iterations;

  plan.coupling = Matrix(n, m);
  std::vector<double> row_sum(n, 0.0), col_sum(m, 0.0);
  double total_cost = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row_cost = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double v = (std::isinf(f[i]) || std::isinf(g[j])) ? 0.0 : std::exp((f[i] + g[j] - cost(i, j)) / eps);
      if (!std::isfinite(v)) {
        raise(ErrorCode::NumericalUnderflow, "sinkhorn coupling overflowed; raise epsilon");
      }
      plan.coupling(i, j) = v;
      row_sum[i] += v;
      col_sum[j] += v;
      row_cost += v * cost(i, j);
    }
    total_cost += row_cost;
  }
  double violation = 0.0;
  for (std::size_t i = 0; i < n; ++i) violation = std::max(violation, std::abs(row_sum[i] - row_marginal[i]));
  for (std::size_t j = 0; j < m; ++j) violation = std::max(violation, std::abs(col_sum[j] - col_marginal[j]));
  plan.marginal_violation = violation;
  plan.cost = total_cost;
  plan.row_marginal.assign(row_marginal.begin(), row_marginal.end());
  plan.col_marginal.assign(col_marginal.begin(), col_marginal.end());
  return plan;
}

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) raise(ErrorCode::InvalidArgument, "wasserstein_1d needs nonempty samples");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const std::size_t n = sa.size();
  const std::size_t m = sb.size();
  if (n == m) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += std::abs(sa[i] - sb[i]);
    return total / static_cast<double>(n);
  }
  // Both quantile functions are step functions; on the common refinement
  // of their breakpoints (in integer ticks of 1/(n*m)) they are constant.
  const auto nm = static_cast<unsigned long long>(n) * m;
  unsigned long long tick = 0;
  std::size_t i = 0, j = 0;
  double total = 0.0;
  while (i < n && j < m) {
    const unsigned long long next_a = static_cast<unsigned long long>(i + 1) * m;
    const unsigned long long next_b = static_cast<unsigned long long>(j + 1) * n;
    const unsigned long long next = std::min(next_a, next_b);
    total += static_cast<double>(next - tick) * std::abs(sa[i] - sb[j]);
    tick = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  return total / static_cast<double>(nm);
}

std::vector<std::size_t> subsample_rows(std::size_t rows, std::size_t cap, std::uint64_t seed) {
  std::vector<std::size_t> idx(rows);
  std::iota(idx.begin(), idx.end(), 0);
  if (rows <= cap) return idx;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

TransportPlan pooled_wasserstein_plan(const Matrix& source, const Matrix& target,
                                      const PooledWassersteinOptions& options) {
  if (source.cols() != target.cols()) {
    raise(ErrorCode::DimensionMismatch, "pooled wasserstein needs a shared feature dimension");
  }
  if (source.rows() == 0 || target.rows() == 0) {
    raise(ErrorCode::InvalidArgument, "pooled wasserstein needs nonempty samples");
  }
  const auto src_rows = subsample_rows(source.rows(), options.row_cap, derive_seed(options.seed, 1));
  const auto tgt_rows = subsample_rows(target.rows(), options.row_cap, derive_seed(options.seed, 2));
  const Matrix s = source.select_rows(src_rows);
  const Matrix t = target.select_rows(tgt_rows);
  const Matrix cost = kernels::euclidean_distances(s, t);
  const std::vector<double> a(s.rows(), 1.0 / static_cast<double>(s.rows()));
  const std::vector<double> b(t.rows(), 1.0 / static_cast<double>(t.rows()));
  return sinkhorn(cost, a, b, options.sinkhorn);
}

double pooled_wasserstein(const Matrix& source, const Matrix& target,
                          const PooledWassersteinOptions& options) {
  return pooled_wasserstein_plan(source, target, options).cost;
}

}  // namespace tabxfer
