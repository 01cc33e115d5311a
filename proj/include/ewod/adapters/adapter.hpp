#pragma once

#include <cstdint>
#include <span>

#include "ewod/linalg/matrix.hpp"

namespace ewod::adapters {

using linalg::Matrix;

/// Low-rank update ΔW = b·a with b (d_out × r) and a (r × d_in).
struct LoraDelta {
  Matrix b;
  Matrix a;

  static LoraDelta zeros(std::size_t d_out, std::size_t d_in, std::size_t r) {
    return {Matrix(d_out, r), Matrix(r, d_in)};
  }

  std::size_t d_out() const { return b.rows(); }
  std::size_t d_in() const { return a.cols(); }
  std::size_t rank() const { return b.cols(); }

  Matrix dense() const { return linalg::matmul(b, a); }
};

/// Aggregate + task-specific adapter pair for one linear layer, with the
/// sample bookkeeping that drives the merge coefficient.
struct AdapterState {
  LoraDelta agg;
  LoraDelta task;
  std::uint64_t n_cumulative = 0;  // samples merged into the aggregate so far
  std::uint32_t task_index = 1;    // 1-based; the task currently training

  static AdapterState fresh(std::size_t d_out, std::size_t d_in,
                            std::size_t r) {
    return {LoraDelta::zeros(d_out, d_in, r), LoraDelta::zeros(d_out, d_in, r),
            0, 1};
  }

  std::size_t rank() const { return agg.rank(); }
};

/// Controls how the merge coefficient β is computed at a task boundary.
struct MergePolicy {
  double beta_min = 0.2;
  double beta_max = 0.8;
  // Denominator for the sample ratio: previous cumulative count alone, or
  // the running total including the current task.
  enum class Ratio { kPrev, kTotal };
  Ratio ratio = Ratio::kPrev;
  // When set, β is fixed_beta for every task after the first.
  bool fixed = false;
  double fixed_beta = 0.5;
};

/// (w0 + ΔW_agg + ΔW_task)·x without materializing the dense deltas.
std::vector<double> apply_adapter(const Matrix& w0, const AdapterState& state,
                                  std::span<const double> x);

/// Merge coefficient: 1 for the first task, otherwise
/// clamp(β_max − (β_max − β_min)·ratio, [β_min, β_max]).
double compute_beta(std::uint64_t n_curr, std::uint64_t n_prev_cumulative,
                    const MergePolicy& policy, std::uint32_t t);

/// (1−β)·agg + β·task as a dense matrix.
Matrix merge_dense(const LoraDelta& agg, const LoraDelta& task, double beta);

/// Best rank-r factorization of m: b = U_r·diag(σ), a = V_rᵀ. Factors are
/// zero-padded to exactly r columns/rows when the input rank is lower.
LoraDelta project_rank(const Matrix& m, std::size_t r);

/// Task boundary: fold the task delta into the aggregate at coefficient β,
/// re-project to rank r, zero the task delta, bump the counters.
AdapterState advance_task(const AdapterState& state, std::uint64_t n_curr,
                          const MergePolicy& policy);

}  // namespace ewod::adapters
