#pragma once

// Data-parallel inner loops shared by retrieval and harmonization. Each
// kernel has an OpenMP implementation in `kernels` and a plain serial
// reference in `kernels::serial`; the test suite checks them against each
// other and the benchmark target times them side by side.
//
// Parallel versions never use OpenMP reduction clauses: partial results are
// written per row and combined in index order, so output does not depend on
// the thread count.

#include <cstddef>
#include <span>
#include <vector>

#include "tabxfer/matrix.hpp"

namespace tabxfer::kernels {

// K(i,j) = exp(-gamma * ||x_i - x_j||^2).
Matrix gaussian_gram(const Matrix& points, double gamma);

// sqrt(sum_ij (K_a(i,j) - K_b(i,j))^2) without materializing either gram.
double gram_discrepancy(const Matrix& a, const Matrix& b, double gamma);

// D(i,j) = ||a_i - b_j||.
Matrix euclidean_distances(const Matrix& a, const Matrix& b);

// ||x_i - x_j|| for all i < j, row-major over the upper triangle.
std::vector<double> condensed_distances(const Matrix& points);

// Cosine of `query` against every row of `vectors`; `norms` holds the row
// norms. A zero norm on either side yields 0.
std::vector<double> cosine_scores(const Matrix& vectors, std::span<const double> norms,
                                  std::span<const double> query, double query_norm);

// out_i = log sum_j exp((potential_j - cost(i,j)) / eps).
void log_sum_exp_rows(const Matrix& cost, std::span<const double> potential, double eps,
                      std::span<double> out);

namespace serial {

Matrix gaussian_gram(const Matrix& points, double gamma);
double gram_discrepancy(const Matrix& a, const Matrix& b, double gamma);
Matrix euclidean_distances(const Matrix& a, const Matrix& b);
std::vector<double> condensed_distances(const Matrix& points);
std::vector<double> cosine_scores(const Matrix& vectors, std::span<const double> norms,
                                  std::span<const double> query, double query_norm);
void log_sum_exp_rows(const Matrix& cost, std::span<const double> potential, double eps,
                      std::span<double> out);

}  // namespace serial

int max_threads();

}  // namespace tabxfer::kernels
