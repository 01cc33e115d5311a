#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "ewod/linalg/hungarian.hpp"
#include "ewod/linalg/matrix.hpp"
#include "ewod/linalg/scalar.hpp"
#include "ewod/linalg/svd.hpp"
#include "ewod/rng.hpp"
#include "testutil.hpp"

using ewod::Rng;
using ewod::linalg::Assignment;
using ewod::linalg::frobenius_distance;
using ewod::linalg::frobenius_norm;
using ewod::linalg::hungarian_assign;
using ewod::linalg::Matrix;
using ewod::linalg::matmul;
using ewod::linalg::SvdResult;
using ewod::linalg::transpose;
using ewod::linalg::truncated_svd;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                     double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.gaussian() * scale;
  return m;
}

Matrix random_rank_k(Rng& rng, std::size_t rows, std::size_t cols,
                     std::size_t k) {
  return matmul(random_matrix(rng, rows, k), random_matrix(rng, k, cols));
}

// Minimum assignment cost by exhaustive search; rows and cols both <= 7.
double brute_force_cost(const Matrix& cost) {
  const bool transposed = cost.rows() > cost.cols();
  const Matrix m = transposed ? transpose(cost) : cost;
  const std::size_t r = m.rows();
  const std::size_t c = m.cols();
  std::vector<std::size_t> cols(c);
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  // Permute columns; the first r entries define the assignment.
  std::sort(cols.begin(), cols.end());
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < r; ++i) total += m(i, cols[i]);
    best = std::min(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace

TEST_CASE("matrix shape and arithmetic basics") {
  Matrix a(2, 3);
  CHECK(a.rows() == 2);
  CHECK(a.cols() == 3);
  for (double v : a.data()) CHECK(v == 0.0);

  Rng rng(7);
  Matrix i3 = Matrix::identity(3);
  Matrix b = random_matrix(rng, 3, 3);
  CHECK(frobenius_distance(matmul(i3, b), b) == doctest::Approx(0.0));
  CHECK(frobenius_distance(matmul(b, i3), b) == doctest::Approx(0.0));

  Matrix t = transpose(a);
  CHECK(t.rows() == 3);
  CHECK(t.cols() == 2);

  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), std::invalid_argument);
  CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, 3.0}), std::invalid_argument);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(Matrix(1, 2, {1.0, nan}), std::invalid_argument);
}

TEST_CASE("scalar link functions satisfy their identities") {
  using ewod::linalg::logit;
  using ewod::linalg::sigmoid;
  using ewod::linalg::softplus;
  using ewod::linalg::softplus_inverse;

  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(-30.0, 30.0);
    CHECK(sigmoid(-x) + sigmoid(x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(softplus(x) - softplus(-x) == doctest::Approx(x).epsilon(1e-12));
    CHECK(softplus(x) >= std::max(x, 0.0));
  }
  // Round-trip precision is limited by cancellation in 1 - sigmoid(x) as
  // the sigmoid saturates, so the tight check stays in the moderate range.
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(-12.0, 12.0);
    CHECK(testutil::rel_err(logit(sigmoid(x)), x) < 1e-9);
  }
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-25.0, 25.0);
    CHECK(testutil::rel_err(logit(sigmoid(x)), x) < 1e-5);
  }
  for (int i = 0; i < 100; ++i) {
    const double y = rng.uniform(1e-6, 40.0);
    CHECK(testutil::rel_err(softplus(softplus_inverse(y)), y) < 1e-10);
  }
  // Extremes stay finite.
  CHECK(sigmoid(1000.0) == 1.0);
  CHECK(sigmoid(-1000.0) == 0.0);
  CHECK(std::isfinite(softplus(1000.0)));
  CHECK_THROWS_AS(logit(0.0), std::domain_error);
  CHECK_THROWS_AS(logit(1.0), std::domain_error);
  CHECK_THROWS_AS(logit(-0.5), std::domain_error);
}

TEST_CASE("truncated svd of diag(3,1) at rank 1") {
  const Matrix m(2, 2, {3.0, 0.0, 0.0, 1.0});
  const SvdResult s = truncated_svd(m, 1);
  REQUIRE(s.sigma.size() == 1);
  CHECK(s.sigma[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(s.u(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.u(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.vt(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.vt(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  const Matrix rec = s.reconstruct();
  CHECK(frobenius_distance(rec, Matrix(2, 2, {3.0, 0.0, 0.0, 0.0})) < 1e-12);
}

TEST_CASE("truncated svd reconstructs low-rank inputs exactly") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 3 + rng.uniform_int(8);
    const std::size_t cols = 3 + rng.uniform_int(8);
    const std::size_t k = 1 + rng.uniform_int(std::min(rows, cols) - 1);
    const Matrix m = random_rank_k(rng, rows, cols, k);
    const SvdResult s = truncated_svd(m, k);
    CHECK(frobenius_distance(s.reconstruct(), m) < 1e-10 * (1.0 + frobenius_norm(m)));
  }
}

TEST_CASE("truncated svd factors are orthonormal with descending spectrum") {
  Rng rng(37);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t rows = 2 + rng.uniform_int(10);
    const std::size_t cols = 2 + rng.uniform_int(10);
    const std::size_t r = 1 + rng.uniform_int(std::min(rows, cols));
    const Matrix m = random_matrix(rng, rows, cols);
    const SvdResult s = truncated_svd(m, r);
    const std::size_t k = s.sigma.size();
    REQUIRE(k <= r);

    const Matrix utu = matmul(transpose(s.u), s.u);
    const Matrix vvt = matmul(s.vt, transpose(s.vt));
    CHECK(frobenius_distance(utu, Matrix::identity(k)) < 1e-9);
    CHECK(frobenius_distance(vvt, Matrix::identity(k)) < 1e-9);
    for (std::size_t i = 1; i < k; ++i) CHECK(s.sigma[i - 1] >= s.sigma[i]);
    for (double sv : s.sigma) CHECK(sv >= 0.0);
  }
}

TEST_CASE("full-rank truncation recovers the matrix") {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t rows = 2 + rng.uniform_int(6);
    const std::size_t cols = 2 + rng.uniform_int(6);
    const Matrix m = random_matrix(rng, rows, cols);
    const SvdResult s = truncated_svd(m, std::min(rows, cols));
    CHECK(frobenius_distance(s.reconstruct(), m) < 1e-9 * (1.0 + frobenius_norm(m)));
  }
}

TEST_CASE("truncated svd beats random low-rank candidates") {
  Rng rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = random_matrix(rng, 12, 9);
    const std::size_t r = 3;
    const SvdResult s = truncated_svd(m, r);
    const double err = frobenius_distance(s.reconstruct(), m);
    for (int cand = 0; cand < 200; ++cand) {
      Matrix c = random_rank_k(rng, 12, 9, r);
      // Rescale the candidate toward m for a harder comparison.
      double num = 0.0;
      double den = 0.0;
      for (std::size_t i = 0; i < c.data().size(); ++i) {
        num += c.data()[i] * m.data()[i];
        den += c.data()[i] * c.data()[i];
      }
      if (den > 0.0) c = ewod::linalg::scale(num / den, c);
      CHECK(err <= frobenius_distance(c, m) + 1e-9);
    }
  }
}

TEST_CASE("svd corner cases") {
  const Matrix zero(3, 4);
  const SvdResult s = truncated_svd(zero, 2);
  REQUIRE(s.sigma.size() == 1);
  CHECK(s.sigma[0] == 0.0);
  CHECK(frobenius_distance(s.reconstruct(), zero) == 0.0);

  // Tall and wide orientations agree through transposition.
  Rng rng(61);
  const Matrix tall = random_matrix(rng, 9, 4);
  const SvdResult st = truncated_svd(tall, 2);
  const SvdResult sw = truncated_svd(transpose(tall), 2);
  CHECK(st.sigma.size() == sw.sigma.size());
  for (std::size_t i = 0; i < st.sigma.size(); ++i) {
    CHECK(st.sigma[i] == doctest::Approx(sw.sigma[i]).epsilon(1e-10));
  }
  CHECK(frobenius_distance(transpose(st.reconstruct()), sw.reconstruct()) < 1e-9);

  CHECK_THROWS_AS(truncated_svd(Matrix(3, 3), 0), std::invalid_argument);
  CHECK_THROWS_AS(truncated_svd(Matrix(3, 3), 4), std::invalid_argument);

  // Sign convention: the largest-magnitude entry of each left vector is
  // positive, so repeated runs and negated inputs are predictable.
  const Matrix m(2, 2, {0.0, 2.0, 1.0, 0.0});
  const SvdResult a = truncated_svd(m, 2);
  for (std::size_t j = 0; j < a.sigma.size(); ++j) {
    double big = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
      if (std::abs(a.u(i, j)) > std::abs(big)) big = a.u(i, j);
    }
    CHECK(big > 0.0);
  }
}

TEST_CASE("hungarian hand cases") {
  const Matrix m(2, 2, {1.0, 2.0, 2.0, 1.0});
  const Assignment a = hungarian_assign(m);
  REQUIRE(a.pairs.size() == 2);
  CHECK(a.pairs[0] == std::pair<std::size_t, std::size_t>{0, 0});
  CHECK(a.pairs[1] == std::pair<std::size_t, std::size_t>{1, 1});
  CHECK(a.total_cost == doctest::Approx(2.0));

  // Off-diagonal optimum.
  const Matrix m2(2, 2, {5.0, 1.0, 1.0, 5.0});
  const Assignment a2 = hungarian_assign(m2);
  CHECK(a2.total_cost == doctest::Approx(2.0));
  CHECK(a2.pairs[0] == std::pair<std::size_t, std::size_t>{0, 1});
  CHECK(a2.pairs[1] == std::pair<std::size_t, std::size_t>{1, 0});

  // All-equal costs resolve to the lexicographically first assignment.
  const Matrix ones(3, 3, std::vector<double>(9, 1.0));
  const Assignment a3 = hungarian_assign(ones);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a3.pairs[i] == std::pair<std::size_t, std::size_t>{i, i});
  }

  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(hungarian_assign(Matrix(1, 1, {inf})), std::invalid_argument);
}

TEST_CASE("hungarian rectangular shapes") {
  // 1xN picks the cheapest column.
  const Matrix wide(1, 4, {3.0, 0.5, 2.0, 0.5});
  const Assignment aw = hungarian_assign(wide);
  REQUIRE(aw.pairs.size() == 1);
  CHECK(aw.pairs[0] == std::pair<std::size_t, std::size_t>{0, 1});
  CHECK(aw.total_cost == doctest::Approx(0.5));

  // Nx1 picks the cheapest row.
  const Matrix tall(4, 1, {3.0, 0.5, 2.0, 0.25});
  const Assignment at = hungarian_assign(tall);
  REQUIRE(at.pairs.size() == 1);
  CHECK(at.pairs[0] == std::pair<std::size_t, std::size_t>{3, 0});
  CHECK(at.total_cost == doctest::Approx(0.25));

  const Matrix one(1, 1, {7.0});
  CHECK(hungarian_assign(one).total_cost == doctest::Approx(7.0));
}

TEST_CASE("hungarian matches brute force on random instances") {
  Rng rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = 1 + rng.uniform_int(7);
    const std::size_t cols = 1 + rng.uniform_int(7);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(-5.0, 5.0);
    // Occasionally quantize so ties are common.
    if (trial % 3 == 0) {
      for (double& v : m.data()) v = std::round(v);
    }
    const Assignment a = hungarian_assign(m);
    CHECK(a.pairs.size() == std::min(rows, cols));
    // Validity: each row and column used at most once.
    std::vector<int> row_used(rows, 0);
    std::vector<int> col_used(cols, 0);
    double total = 0.0;
    for (auto [i, j] : a.pairs) {
      CHECK(++row_used[i] == 1);
      CHECK(++col_used[j] == 1);
      total += m(i, j);
    }
    CHECK(a.total_cost == doctest::Approx(total).epsilon(1e-9));
    CHECK(a.total_cost ==
          doctest::Approx(brute_force_cost(m)).epsilon(1e-9));
  }
}

TEST_CASE("hungarian lexicographic tie-break matches exhaustive rule") {
  Rng rng(83);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t rows = 1 + rng.uniform_int(5);
    const std::size_t cols = rows + rng.uniform_int(3);  // rows <= cols
    Matrix m(rows, cols);
    for (double& v : m.data()) v = std::round(rng.uniform(0.0, 4.0));
    const Assignment got = hungarian_assign(m);

    // Enumerate all optimal assignments; pick smallest column sequence.
    std::vector<std::size_t> cols_perm(cols);
    std::iota(cols_perm.begin(), cols_perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_seq;
    do {
      double total = 0.0;
      for (std::size_t i = 0; i < rows; ++i) total += m(i, cols_perm[i]);
      std::vector<std::size_t> seq(cols_perm.begin(), cols_perm.begin() + rows);
      if (total < best - 1e-12 ||
          (std::abs(total - best) <= 1e-12 &&
           (best_seq.empty() || seq < best_seq))) {
        best = total;
        best_seq = seq;
      }
    } while (std::next_permutation(cols_perm.begin(), cols_perm.end()));

    REQUIRE(got.pairs.size() == rows);
    for (std::size_t i = 0; i < rows; ++i) {
      CHECK(got.pairs[i].first == i);
      CHECK(got.pairs[i].second == best_seq[i]);
    }
  }
}
