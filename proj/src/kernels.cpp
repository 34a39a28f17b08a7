#include "tabxfer/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tabxfer::kernels {
namespace {

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - y[k];
    s += d * d;
  }
  return s;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
  return s;
}

inline double row_log_sum_exp(std::span<const double> cost_row, std::span<const double> potential,
                              double eps) {
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < cost_row.size(); ++j) {
    peak = std::max(peak, (potential[j] - cost_row[j]) / eps);
  }
  if (!std::isfinite(peak)) return peak;
  double sum = 0.0;
  for (std::size_t j = 0; j < cost_row.size(); ++j) {
    sum += std::exp((potential[j] - cost_row[j]) / eps - peak);
  }
  return peak + std::log(sum);
}

inline double cosine(std::span<const double> v, double norm, std::span<const double> q, double qnorm) {
  if (norm == 0.0 || qnorm == 0.0) return 0.0;
  return std::clamp(dot(v, q) / (norm * qnorm), -1.0, 1.0);
}

using Index = std::ptrdiff_t;

}  // namespace

Matrix gaussian_gram(const Matrix& points, double gamma) {
  const Index m = static_cast<Index>(points.rows());
  Matrix k(points.rows(), points.rows());
#pragma omp parallel for schedule(dynamic, 16)
  for (Index i = 0; i < m; ++i) {
    k(i, i) = 1.0;
    for (Index j = i + 1; j < m; ++j) {
      const double v = std::exp(-gamma * squared_distance(points.row(i), points.row(j)));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

double gram_discrepancy(const Matrix& a, const Matrix& b, double gamma) {
  const Index m = static_cast<Index>(a.rows());
  std::vector<double> partial(a.rows(), 0.0);
#pragma omp parallel for schedule(dynamic, 16)
  for (Index i = 0; i < m; ++i) {
    double s = 0.0;
    for (Index j = i + 1; j < m; ++j) {
      const double d = std::exp(-gamma * squared_distance(a.row(i), a.row(j))) -
                       std::exp(-gamma * squared_distance(b.row(i), b.row(j)));
      s += d * d;
    }
    partial[i] = s;
  }
  double total = 0.0;
  for (double s : partial) total += s;
  // diagonal terms are exactly zero; off-diagonal terms appear twice
  return std::sqrt(2.0 * total);
}

Matrix euclidean_distances(const Matrix& a, const Matrix& b) {
  const Index n = static_cast<Index>(a.rows());
  Matrix d(a.rows(), b.rows());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      d(i, j) = std::sqrt(squared_distance(a.row(i), b.row(j)));
    }
  }
  return d;
}

std::vector<double> condensed_distances(const Matrix& points) {
  const std::size_t m = points.rows();
  std::vector<double> out(m * (m - (m ? 1 : 0)) / 2);
#pragma omp parallel for schedule(dynamic, 16)
  for (Index i = 0; i < static_cast<Index>(m); ++i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    // offset of row i in the condensed upper triangle
    std::size_t offset = ui * m - ui * (ui + 1) / 2;
    for (std::size_t j = ui + 1; j < m; ++j) {
      out[offset++] = std::sqrt(squared_distance(points.row(ui), points.row(j)));
    }
  }
  return out;
}

std::vector<double> cosine_scores(const Matrix& vectors, std::span<const double> norms,
                                  std::span<const double> query, double query_norm) {
  const Index n = static_cast<Index>(vectors.rows());
  std::vector<double> out(vectors.rows());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    out[i] = cosine(vectors.row(i), norms[i], query, query_norm);
  }
  return out;
}

void log_sum_exp_rows(const Matrix& cost, std::span<const double> potential, double eps,
                      std::span<double> out) {
  const Index n = static_cast<Index>(cost.rows());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    out[i] = row_log_sum_exp(cost.row(i), potential, eps);
  }
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

Matrix gaussian_gram(const Matrix& points, double gamma) {
  const std::size_t m = points.rows();
  Matrix k(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      k(i, j) = i == j ? 1.0 : std::exp(-gamma * squared_distance(points.row(i), points.row(j)));
    }
  }
  return k;
}

double gram_discrepancy(const Matrix& a, const Matrix& b, double gamma) {
  const std::size_t m = a.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      const double d = std::exp(-gamma * squared_distance(a.row(i), a.row(j))) -
                       std::exp(-gamma * squared_distance(b.row(i), b.row(j)));
      s += d * d;
    }
    total += s;
  }
  return std::sqrt(2.0 * total);
}

Matrix euclidean_distances(const Matrix& a, const Matrix& b) {
  Matrix d(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      d(i, j) = std::sqrt(squared_distance(a.row(i), b.row(j)));
    }
  }
  return d;
}

std::vector<double> condensed_distances(const Matrix& points) {
  std::vector<double> out;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    for (std::size_t j = i + 1; j < points.rows(); ++j) {
      out.push_back(std::sqrt(squared_distance(points.row(i), points.row(j))));
    }
  }
  return out;
}

std::vector<double> cosine_scores(const Matrix& vectors, std::span<const double> norms,
                                  std::span<const double> query, double query_norm) {
  std::vector<double> out(vectors.rows());
  for (std::size_t i = 0; i < vectors.rows(); ++i) {
    out[i] = cosine(vectors.row(i), norms[i], query, query_norm);
  }
  return out;
}

void log_sum_exp_rows(const Matrix& cost, std::span<const double> potential, double eps,
                      std::span<double> out) {
  for (std::size_t i = 0; i < cost.rows(); ++i) {
    out[i] = row_log_sum_exp(cost.row(i), potential, eps);
  }
}

}  // namespace serial
}  // namespace tabxfer::kernels
