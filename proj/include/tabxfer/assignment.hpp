#pragma once

#include <cstddef>
#include <vector>

#include "tabxfer/matrix.hpp"

namespace tabxfer {

// Maximum-score one-to-one assignment of rows to columns of `score`.
// Returns, per row, the matched column or -1; exactly min(rows, cols)
// rows are matched.
std::vector<int> solve_assignment(const Matrix& score);

// Exhaustive search over all injective maps of the smaller side. Feasible
// only for tiny problems; ties resolve to the lexicographically first map.
std::vector<int> solve_assignment_exhaustive(const Matrix& score);

// O(n^3) shortest-augmenting-path (Hungarian) solver.
std::vector<int> solve_assignment_hungarian(const Matrix& score);

double assignment_score(const Matrix& score, const std::vector<int>& assignment);

}  // namespace tabxfer
