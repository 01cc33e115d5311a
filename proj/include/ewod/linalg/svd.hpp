#pragma once

#include <cstddef>
#include <vector>

#include "ewod/linalg/matrix.hpp"

namespace ewod::linalg {

/// Thin SVD factorization m ~= u * diag(sigma) * vt with k columns/rows,
/// k <= requested rank. Columns of u and rows of vt are orthonormal;
/// sigma is nonincreasing and nonnegative.
struct SvdResult {
  Matrix u;                   // m x k
  std::vector<double> sigma;  // length k
  Matrix vt;                  // k x n

  Matrix reconstruct() const;
};

/// Best rank-r approximation via one-sided Jacobi SVD. Returns k =
/// min(r, numerical rank) components (at least one; a zero matrix yields a
/// single zero singular value with canonical basis factors). Deterministic:
/// the largest-magnitude entry of each left singular vector is made positive,
/// ties resolved by lowest index.
SvdResult truncated_svd(const Matrix& m, std::size_t r);

}  // namespace ewod::linalg
