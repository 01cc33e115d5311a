#include "ewod/sim/tape.hpp"

#include <limits>

namespace ewod::sim {

Var Tape::push(double value, std::span<const Var> parents,
               std::span<const double> partials) {
  if (backward_done_) {
    throw std::logic_error("Tape: graph is frozen after backward; reset first");
  }
  const std::int32_t idx = static_cast<std::int32_t>(val_.size());
  val_.push_back(value);
  for (std::size_t i = 0; i < parents.size(); ++i) {
    parents_.push_back(parents[i].idx);
    partials_.push_back(partials[i]);
  }
  arg_begin_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return Var{this, idx};
}

void Tape::backward(Var root) {
  if (backward_done_) {
    throw std::logic_error("Tape::backward: already run; reset first");
  }
  backward_done_ = true;
  grad_.assign(val_.size(), 0.0);
  grad_[static_cast<std::size_t>(root.idx)] = 1.0;
  for (std::size_t n = val_.size(); n-- > 0;) {
    const double g = grad_[n];
    if (g == 0.0) continue;
    const std::uint32_t begin = arg_begin_[n];
    const std::uint32_t end = arg_begin_[n + 1];
    for (std::uint32_t k = begin; k < end; ++k) {
      grad_[static_cast<std::size_t>(parents_[k])] += g * partials_[k];
    }
  }
}

Var max_of(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("max_of: empty span");
  std::size_t best = 0;
  double m = xs[0].value();
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const double v = xs[i].value();
    if (v > m) {
      m = v;
      best = i;
    }
  }
  return xs[0].tape->unary(m, xs[best], 1.0);
}

Var dot(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  if (a.empty()) throw std::invalid_argument("dot: empty span");
  Tape* tape = a[0].tape;
  double s = 0.0;
  std::vector<Var> parents;
  std::vector<double> partials;
  parents.reserve(a.size() * 2);
  partials.reserve(a.size() * 2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double av = a[i].value();
    const double bv = b[i].value();
    s += av * bv;
    parents.push_back(a[i]);
    partials.push_back(bv);
    parents.push_back(b[i]);
    partials.push_back(av);
  }
  return tape->nary(s, parents, partials);
}

Var sum(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("sum: empty span");
  double s = 0.0;
  std::vector<double> ones(xs.size(), 1.0);
  for (Var x : xs) s += x.value();
  return xs[0].tape->nary(s, xs, ones);
}

Var weighted_sum(std::span<const double> coeffs, std::span<const Var> xs,
                 double bias) {
  if (coeffs.size() != xs.size()) {
    throw std::invalid_argument("weighted_sum: size mismatch");
  }
  if (xs.empty()) throw std::invalid_argument("weighted_sum: empty span");
  double s = bias;
  for (std::size_t i = 0; i < xs.size(); ++i) s += coeffs[i] * xs[i].value();
  return xs[0].tape->nary(s, xs, coeffs);
}

}  // namespace ewod::sim
