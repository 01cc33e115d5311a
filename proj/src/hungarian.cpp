#include "ewod/linalg/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ewod::linalg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Jonker-Volgenant style shortest augmenting path. Requires n <= m; matches
// every row, returns the optimal total cost. a is n x m, 0-indexed.
double solve_rows_le_cols(const std::vector<std::vector<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0) return 0.0;
  const std::size_t m = a[0].size();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
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
  double total = 0.0;
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) total += a[p[j] - 1][j - 1];
  }
  return total;
}

// Optimal cost of assigning min(|rows|,|cols|) pairs within the given
// row/column subsets.
double optimal_cost(const Matrix& cost, const std::vector<std::size_t>& rows,
                    const std::vector<std::size_t>& cols) {
  if (rows.empty() || cols.empty()) return 0.0;
  const bool transpose_needed = rows.size() > cols.size();
  const auto& rr = transpose_needed ? cols : rows;
  const auto& cc = transpose_needed ? rows : cols;
  std::vector<std::vector<double>> a(rr.size(), std::vector<double>(cc.size()));
  for (std::size_t i = 0; i < rr.size(); ++i) {
    for (std::size_t j = 0; j < cc.size(); ++j) {
      a[i][j] = transpose_needed ? cost(cc[j], rr[i]) : cost(rr[i], cc[j]);
    }
  }
  return solve_rows_le_cols(a);
}

}  // namespace

Assignment hungarian_assign(const Matrix& cost) {
  for (double c : cost.data()) {
    if (!std::isfinite(c)) {
      throw std::invalid_argument("hungarian_assign: non-finite cost entry");
    }
  }
  const std::size_t n_rows = cost.rows();
  const std::size_t n_cols = cost.cols();

  std::vector<std::size_t> rows(n_rows), cols(n_cols);
  for (std::size_t i = 0; i < n_rows; ++i) rows[i] = i;
  for (std::size_t j = 0; j < n_cols; ++j) cols[j] = j;

  double target = optimal_cost(cost, rows, cols);

  // Fix pairs row by row, always taking the smallest column (or skipping the
  // row when rows outnumber columns) that still attains the optimum. Sums of
  // identical entries may round differently across subproblems, hence the
  // tolerance.
  Assignment result;
  std::vector<std::size_t> rem_cols = cols;
  std::vector<std::size_t> rem_rows = rows;
  for (std::size_t i = 0; i < n_rows && !rem_cols.empty(); ++i) {
    rem_rows.erase(rem_rows.begin());  // rows are processed in order
    const double tol = 1e-9 * (1.0 + std::abs(target));
    const bool row_required = rem_rows.size() < rem_cols.size();
    bool fixed = false;
    std::size_t best_cj = 0;
    double best_value = kInf;
    for (std::size_t cj = 0; cj < rem_cols.size(); ++cj) {
      const std::size_t j = rem_cols[cj];
      std::vector<std::size_t> cols_wo = rem_cols;
      cols_wo.erase(cols_wo.begin() + static_cast<std::ptrdiff_t>(cj));
      const double rest = optimal_cost(cost, rem_rows, cols_wo);
      const double value = cost(i, j) + rest;
      if (value < best_value) {
        best_value = value;
        best_cj = cj;
      }
      if (value <= target + tol) {
        result.pairs.emplace_back(i, j);
        result.total_cost += cost(i, j);
        target = rest;
        rem_cols = std::move(cols_wo);
        fixed = true;
        break;
      }
    }
    if (!fixed) {
      if (row_required) {
        // Numerical drift kept every candidate above target; take the best.
        const std::size_t j = rem_cols[best_cj];
        result.pairs.emplace_back(i, j);
        result.total_cost += cost(i, j);
        rem_cols.erase(rem_cols.begin() + static_cast<std::ptrdiff_t>(best_cj));
        target = best_value - cost(i, j);
      } else {
        // Row left unmatched (rows outnumber columns).
        target = optimal_cost(cost, rem_rows, rem_cols);
      }
    }
  }
  return result;
}

}  // namespace ewod::linalg
