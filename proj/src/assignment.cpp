#include "tabxfer/assignment.hpp"

#include <algorithm>
#include <functional>
#include <limits>

namespace tabxfer {
namespace {

constexpr std::size_t kExhaustiveSideLimit = 6;
constexpr double kExhaustiveEnumerationLimit = 200000.0;

Matrix transposed(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  }
  return t;
}

std::vector<int> invert(const std::vector<int>& col_to_row, std::size_t rows) {
  std::vector<int> out(rows, -1);
  for (std::size_t j = 0; j < col_to_row.size(); ++j) {
    if (col_to_row[j] >= 0) out[static_cast<std::size_t>(col_to_row[j])] = static_cast<int>(j);
  }
  return out;
}

// rows <= cols
std::vector<int> exhaustive_wide(const Matrix& score) {
  const std::size_t n = score.rows();
  const std::size_t m = score.cols();
  std::vector<int> best(n, -1), current(n, -1);
  std::vector<char> used(m, 0);
  double best_score = -std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, double)> recurse = [&](std::size_t row, double acc) {
    if (row == n) {
      if (acc > best_score) {
        best_score = acc;
        best = current;
      }
      return;
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (used[j]) continue;
      used[j] = 1;
      current[row] = static_cast<int>(j);
      recurse(row + 1, acc + score(row, j));
      used[j] = 0;
    }
  };
  recurse(0, 0.0);
  return best;
}

// rows <= cols, minimizing cost; 1-based potentials formulation.
std::vector<int> hungarian_wide(const Matrix& cost) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) out[p[j] - 1] = static_cast<int>(j - 1);
  }
  return out;
}

double permutations(std::size_t n, std::size_t k) {
  double count = 1.0;
  for (std::size_t i = 0; i < k; ++i) count *= static_cast<double>(n - i);
  return count;
}

}  // namespace

std::vector<int> solve_assignment_exhaustive(const Matrix& score) {
  if (score.rows() <= score.cols()) return exhaustive_wide(score);
  const auto col_to_row = exhaustive_wide(transposed(score));
  return invert(col_to_row, score.rows());
}

std::vector<int> solve_assignment_hungarian(const Matrix& score) {
  const bool wide = score.rows() <= score.cols();
  const Matrix s = wide ? score : transposed(score);
  Matrix cost(s.rows(), s.cols());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 0; j < s.cols(); ++j) cost(i, j) = -s(i, j);
  }
  const auto assigned = hungarian_wide(cost);
  return wide ? assigned : invert(assigned, score.rows());
}

std::vector<int> solve_assignment(const Matrix& score) {
  if (score.rows() == 0 || score.cols() == 0) return std::vector<int>(score.rows(), -1);
  const std::size_t small = std::min(score.rows(), score.cols());
  const std::size_t large = std::max(score.rows(), score.cols());
  if (small <= kExhaustiveSideLimit && permutations(large, small) <= kExhaustiveEnumerationLimit) {
    return solve_assignment_exhaustive(score);
  }
  return solve_assignment_hungarian(score);
}

double assignment_score(const Matrix& score, const std::vector<int>& assignment) {
  double total = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] >= 0) total += score(i, static_cast<std::size_t>(assignment[i]));
  }
  return total;
}

}  // namespace tabxfer
