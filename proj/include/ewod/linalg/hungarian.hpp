#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "ewod/linalg/matrix.hpp"

namespace ewod::linalg {

/// Partial permutation of rows onto columns. pairs is sorted by row index;
/// total_cost is the plain sum of the selected cost entries.
struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;
};

/// Minimum-cost bipartite assignment of cardinality min(rows, cols).
/// Among all optimal assignments, returns the one with the
/// lexicographically smallest pair list. O(n^3) shortest-augmenting-path
/// core plus an explicit tie-break pass; intended for small matrices.
Assignment hungarian_assign(const Matrix& cost);

}  // namespace ewod::linalg
