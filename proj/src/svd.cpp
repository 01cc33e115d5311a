#include "ewod/linalg/svd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ewod::linalg {

Matrix SvdResult::reconstruct() const {
  Matrix us = u;
  for (std::size_t j = 0; j < sigma.size(); ++j) {
    for (std::size_t i = 0; i < us.rows(); ++i) us(i, j) *= sigma[j];
  }
  return matmul(us, vt);
}

namespace {

constexpr double kJacobiTol = 1e-12;
constexpr int kMaxSweeps = 60;

// One-sided Jacobi on the columns of w (p x q, p >= q). Accumulates the
// right rotations into v (q x q). On exit the columns of w are mutually
// orthogonal to kJacobiTol relative.
void jacobi_orthogonalize(Matrix& w, Matrix& v) {
  const std::size_t p = w.rows();
  const std::size_t q = w.cols();
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < q; ++i) {
      for (std::size_t j = i + 1; j < q; ++j) {
        double a = 0.0, b = 0.0, c = 0.0;
        for (std::size_t k = 0; k < p; ++k) {
          const double wi = w(k, i);
          const double wj = w(k, j);
          a += wi * wi;
          b += wj * wj;
          c += wi * wj;
        }
        if (a == 0.0 || b == 0.0) continue;
        if (std::abs(c) <= kJacobiTol * std::sqrt(a * b)) continue;
        rotated = true;
        const double zeta = (b - a) / (2.0 * c);
        const double t =
            (zeta >= 0.0 ? 1.0 : -1.0) /
            (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (std::size_t k = 0; k < p; ++k) {
          const double wi = w(k, i);
          const double wj = w(k, j);
          w(k, i) = cs * wi - sn * wj;
          w(k, j) = sn * wi + cs * wj;
        }
        for (std::size_t k = 0; k < q; ++k) {
          const double vi = v(k, i);
          const double vj = v(k, j);
          v(k, i) = cs * vi - sn * vj;
          v(k, j) = sn * vi + cs * vj;
        }
      }
    }
    if (!rotated) break;
  }
}

}  // namespace

SvdResult truncated_svd(const Matrix& m, std::size_t r) {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  if (rows == 0 || cols == 0) {
    throw std::invalid_argument("truncated_svd: empty matrix");
  }
  if (r < 1 || r > std::min(rows, cols)) {
    throw std::invalid_argument("truncated_svd: rank out of range");
  }
  require_finite(m, "truncated_svd");

  // Work on the tall orientation so columns are the short dimension.
  const bool swapped = rows < cols;
  Matrix w = swapped ? transpose(m) : m;
  const std::size_t q = w.cols();
  Matrix v = Matrix::identity(q);
  jacobi_orthogonalize(w, v);

  // Column norms are the singular values.
  std::vector<double> sigma(q, 0.0);
  for (std::size_t j = 0; j < q; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.rows(); ++i) s += w(i, j) * w(i, j);
    sigma[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(q);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  const double sigma_max = sigma[order[0]];
  const double rank_tol = static_cast<double>(std::max(rows, cols)) *
                          std::numeric_limits<double>::epsilon() * sigma_max;
  std::size_t num_rank = 0;
  for (std::size_t j : order) {
    if (sigma[j] > rank_tol && sigma[j] > 0.0) ++num_rank;
  }

  std::size_t k = std::min(r, num_rank);
  if (k == 0) {
    // Zero matrix: canonical rank-1 factorization with zero singular value.
    SvdResult res{Matrix(rows, 1), {0.0}, Matrix(1, cols)};
    res.u(0, 0) = 1.0;
    res.vt(0, 0) = 1.0;
    return res;
  }

  Matrix u_work(w.rows(), k);   // normalized columns of w
  Matrix v_work(q, k);          // matching columns of v
  std::vector<double> sig(k);
  for (std::size_t jj = 0; jj < k; ++jj) {
    const std::size_t j = order[jj];
    sig[jj] = sigma[j];
    for (std::size_t i = 0; i < w.rows(); ++i) u_work(i, jj) = w(i, j) / sigma[j];
    for (std::size_t i = 0; i < q; ++i) v_work(i, jj) = v(i, j);
  }

  SvdResult res;
  res.sigma = std::move(sig);
  if (!swapped) {
    res.u = std::move(u_work);
    res.vt = transpose(v_work);
  } else {
    res.u = std::move(v_work);
    res.vt = transpose(u_work);
  }

  // Sign convention: largest-magnitude entry of each left singular vector
  // positive, so serialized factors are reproducible.
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t arg = 0;
    double best = std::abs(res.u(0, j));
    for (std::size_t i = 1; i < res.u.rows(); ++i) {
      const double a = std::abs(res.u(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (res.u(arg, j) < 0.0) {
      for (std::size_t i = 0; i < res.u.rows(); ++i) res.u(i, j) = -res.u(i, j);
      for (std::size_t i = 0; i < res.vt.cols(); ++i) res.vt(j, i) = -res.vt(j, i);
    }
  }
  return res;
}

}  // namespace ewod::linalg
