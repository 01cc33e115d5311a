#include "ewod/adapters/adapter.hpp"

#include <algorithm>
#include <stdexcept>

#include "ewod/linalg/svd.hpp"

namespace ewod::adapters {

namespace {

// y += b·(a·x)
void add_factored(const LoraDelta& d, std::span<const double> x,
                  std::vector<double>& y) {
  const std::size_t r = d.rank();
  std::vector<double> ax(r, 0.0);
  for (std::size_t k = 0; k < r; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < d.a.cols(); ++j) s += d.a(k, j) * x[j];
    ax[k] = s;
  }
  for (std::size_t i = 0; i < d.b.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < r; ++k) s += d.b(i, k) * ax[k];
    y[i] += s;
  }
}

void check_delta_shape(const LoraDelta& d, std::size_t d_out, std::size_t d_in,
                       const char* what) {
  if (d.b.rows() != d_out || d.a.cols() != d_in || d.b.cols() != d.a.rows()) {
    throw std::invalid_argument(std::string(what) + ": factor shape mismatch");
  }
}

}  // namespace

std::vector<double> apply_adapter(const Matrix& w0, const AdapterState& state,
                                  std::span<const double> x) {
  if (x.size() != w0.cols()) {
    throw std::invalid_argument("apply_adapter: input length mismatch");
  }
  check_delta_shape(state.agg, w0.rows(), w0.cols(), "apply_adapter agg");
  check_delta_shape(state.task, w0.rows(), w0.cols(), "apply_adapter task");
  std::vector<double> y = linalg::matvec(w0, x);
  add_factored(state.agg, x, y);
  add_factored(state.task, x, y);
  return y;
}

double compute_beta(std::uint64_t n_curr, std::uint64_t n_prev_cumulative,
                    const MergePolicy& policy, std::uint32_t t) {
  if (t < 1) throw std::invalid_argument("compute_beta: task index must be >= 1");
  if (t == 1) return 1.0;
  if (policy.fixed) return policy.fixed_beta;
  if (n_prev_cumulative == 0) {
    throw std::domain_error(
        "compute_beta: no previous samples recorded at task >= 2");
  }
  const double nc = static_cast<double>(n_curr);
  const double np = static_cast<double>(n_prev_cumulative);
  const double ratio =
      policy.ratio == MergePolicy::Ratio::kPrev ? nc / np : nc / (nc + np);
  const double raw = policy.beta_max - (policy.beta_max - policy.beta_min) * ratio;
  return std::clamp(raw, policy.beta_min, policy.beta_max);
}

Matrix merge_dense(const LoraDelta& agg, const LoraDelta& task, double beta) {
  if (agg.d_out() != task.d_out() || agg.d_in() != task.d_in()) {
    throw std::invalid_argument("merge_dense: delta shape mismatch");
  }
  if (beta < 0.0 || beta > 1.0) {
    throw std::invalid_argument("merge_dense: beta outside [0, 1]");
  }
  return linalg::add(linalg::scale(1.0 - beta, agg.dense()),
                     linalg::scale(beta, task.dense()));
}

LoraDelta project_rank(const Matrix& m, std::size_t r) {
  const linalg::SvdResult s = linalg::truncated_svd(m, r);
  const std::size_t k = s.sigma.size();  // may be < r for low-rank input
  LoraDelta out = LoraDelta::zeros(m.rows(), m.cols(), r);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      out.b(i, j) = s.u(i, j) * s.sigma[j];
    }
    for (std::size_t c = 0; c < m.cols(); ++c) out.a(j, c) = s.vt(j, c);
  }
  return out;
}

AdapterState advance_task(const AdapterState& state, std::uint64_t n_curr,
                          const MergePolicy& policy) {
  const double beta =
      compute_beta(n_curr, state.n_cumulative, policy, state.task_index);
  const Matrix merged = merge_dense(state.agg, state.task, beta);
  AdapterState next;
  next.agg = project_rank(merged, state.rank());
  next.task = LoraDelta::zeros(state.task.d_out(), state.task.d_in(),
                               state.task.rank());
  next.n_cumulative = state.n_cumulative + n_curr;
  next.task_index = state.task_index + 1;
  return next;
}

}  // namespace ewod::adapters
