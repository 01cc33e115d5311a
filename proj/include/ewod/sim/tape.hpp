#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ewod/linalg/scalar.hpp"

namespace ewod::sim {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; arithmetic on Vars records
/// the computation for reverse-mode differentiation.
struct Var {
  Tape* tape = nullptr;
  std::int32_t idx = -1;
  double value() const;
};

/// Append-only computation graph with precomputed local partials.
/// Construction order is a topological order, so backward() is a single
/// reverse sweep. One backward pass per recorded graph.
class Tape {
 public:
  explicit Tape(std::size_t reserve_nodes = 0) {
    if (reserve_nodes > 0) {
      val_.reserve(reserve_nodes);
      arg_begin_.reserve(reserve_nodes + 1);
      parents_.reserve(reserve_nodes * 2);
      partials_.reserve(reserve_nodes * 2);
    }
    arg_begin_.push_back(0);
  }

  Var leaf(double value) { return push(value, {}, {}); }

  double value(Var v) const { return val_[static_cast<std::size_t>(v.idx)]; }

  std::size_t size() const { return val_.size(); }

  /// Accumulates d(root)/d(node) for every node. Throws if run twice
  /// without reset().
  void backward(Var root);

  double grad(Var v) const {
    if (grad_.empty()) throw std::logic_error("Tape::grad: run backward first");
    return grad_[static_cast<std::size_t>(v.idx)];
  }

  void reset() {
    val_.clear();
    grad_.clear();
    arg_begin_.assign(1, 0);
    parents_.clear();
    partials_.clear();
    backward_done_ = false;
  }

  // --- node constructors (used by the operator layer below) ---

  Var unary(double value, Var a, double da) {
    const Var p[1] = {a};
    const double d[1] = {da};
    return push(value, p, d);
  }

  Var binary(double value, Var a, double da, Var b, double db) {
    const Var p[2] = {a, b};
    const double d[2] = {da, db};
    return push(value, p, d);
  }

  Var nary(double value, std::span<const Var> parents,
           std::span<const double> partials) {
    return push(value, parents, partials);
  }

 private:
  Var push(double value, std::span<const Var> parents,
           std::span<const double> partials);

  std::vector<double> val_;
  std::vector<double> grad_;
  std::vector<std::uint32_t> arg_begin_;  // size = nodes + 1
  std::vector<std::int32_t> parents_;
  std::vector<double> partials_;
  bool backward_done_ = false;
};

inline double Var::value() const { return tape->value(*this); }

// --- arithmetic ---

inline Var operator+(Var a, Var b) {
  return a.tape->binary(a.value() + b.value(), a, 1.0, b, 1.0);
}
inline Var operator+(Var a, double c) {
  return a.tape->unary(a.value() + c, a, 1.0);
}
inline Var operator+(double c, Var a) { return a + c; }

inline Var operator-(Var a, Var b) {
  return a.tape->binary(a.value() - b.value(), a, 1.0, b, -1.0);
}
inline Var operator-(Var a, double c) {
  return a.tape->unary(a.value() - c, a, 1.0);
}
inline Var operator-(double c, Var a) {
  return a.tape->unary(c - a.value(), a, -1.0);
}
inline Var operator-(Var a) { return a.tape->unary(-a.value(), a, -1.0); }

inline Var operator*(Var a, Var b) {
  return a.tape->binary(a.value() * b.value(), a, b.value(), b, a.value());
}
inline Var operator*(Var a, double c) {
  return a.tape->unary(a.value() * c, a, c);
}
inline Var operator*(double c, Var a) { return a * c; }

inline Var operator/(Var a, Var b) {
  const double bv = b.value();
  const double q = a.value() / bv;
  return a.tape->binary(q, a, 1.0 / bv, b, -q / bv);
}
inline Var operator/(Var a, double c) { return a * (1.0 / c); }
inline Var operator/(double c, Var a) {
  const double av = a.value();
  return a.tape->unary(c / av, a, -c / (av * av));
}

// --- elementary functions (names chosen so templated numeric code can call
// them unqualified on either double or Var) ---

inline Var tanh(Var a) {
  const double t = std::tanh(a.value());
  return a.tape->unary(t, a, 1.0 - t * t);
}

inline Var exp(Var a) {
  const double e = std::exp(a.value());
  return a.tape->unary(e, a, e);
}

inline Var log(Var a) { return a.tape->unary(std::log(a.value()), a, 1.0 / a.value()); }

inline Var sqrt(Var a) {
  const double s = std::sqrt(a.value());
  return a.tape->unary(s, a, 0.5 / s);
}

inline Var abs(Var a) {
  const double v = a.value();
  return a.tape->unary(std::abs(v), a, v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
}

inline Var sigmoid(Var a) {
  const double s = linalg::sigmoid(a.value());
  return a.tape->unary(s, a, s * (1.0 - s));
}

inline Var softplus(Var a) {
  return a.tape->unary(linalg::softplus(a.value()), a,
                       linalg::sigmoid(a.value()));
}

inline Var logit(Var a) {
  const double p = a.value();
  return a.tape->unary(linalg::logit(p), a, 1.0 / (p * (1.0 - p)));
}

/// base^expo with both sides differentiable; base must be > 0.
inline Var pow(Var base, Var expo) {
  const double b = base.value();
  const double e = expo.value();
  const double v = std::pow(b, e);
  return base.tape->binary(v, base, e * std::pow(b, e - 1.0), expo,
                           v * std::log(b));
}

/// Clamp with zero gradient outside [lo, hi].
inline Var clamp(Var a, double lo, double hi) {
  const double v = a.value();
  if (v < lo) return a.tape->unary(lo, a, 0.0);
  if (v > hi) return a.tape->unary(hi, a, 0.0);
  return a;
}

/// Maximum of a nonempty span; subgradient routed to the first argmax.
Var max_of(std::span<const Var> xs);

/// Fused dot product of two Var vectors.
Var dot(std::span<const Var> a, std::span<const Var> b);

/// Fused sum.
Var sum(std::span<const Var> xs);

/// Fused affine form: sum_i coeffs[i] * xs[i] + bias (coeffs constant).
Var weighted_sum(std::span<const double> coeffs, std::span<const Var> xs,
                 double bias = 0.0);

// double counterparts so templated code compiles for plain evaluation.
inline double max_of(std::span<const double> xs) {
  double m = xs[0];
  for (double x : xs) m = x > m ? x : m;
  return m;
}
inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
inline double sum(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}
inline double weighted_sum(std::span<const double> coeffs,
                           std::span<const double> xs, double bias = 0.0) {
  double s = bias;
  for (std::size_t i = 0; i < xs.size(); ++i) s += coeffs[i] * xs[i];
  return s;
}
inline double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// Helpers for code templated on double vs Var.
inline double value_of(double x) { return x; }
inline double value_of(Var v) { return v.value(); }
inline double constant_like(double, double c) { return c; }
inline Var constant_like(Var ref, double c) { return ref.tape->leaf(c); }

}  // namespace ewod::sim
