#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "ewod/linalg/scalar.hpp"
#include "ewod/sim/tape.hpp"

// Detection-head forward computations over decoder-query features:
// norm-direction mixing for the classifier input, a scalar objectness MLP
// on the feature magnitude, and the unknown-probability mixer that combines
// classifier and objectness evidence into the final unknown logit.
//
// Everything is templated on the scalar type so the same arithmetic runs
// on plain doubles (inference, oracles) and on tape variables (training).

namespace ewod::heads {

using linalg::logit;
using linalg::sigmoid;
using linalg::softplus;
using sim::clamp;
using sim::constant_like;
using sim::dot;
using sim::logit;
using sim::max_of;
using sim::sigmoid;
using sim::softplus;
using sim::sqrt;
using sim::sum;
using sim::tanh;
using sim::value_of;
using std::pow;
using std::sqrt;
using std::tanh;
using Var = sim::Var;
using sim::pow;

/// Parameters of the per-query heads. w_cls is (n_known+1) × d row-major;
/// the last row produces the raw unknown logit. f_obj is a 1 → hidden → 1
/// tanh MLP; an empty hidden layer means f_obj is the identity.
template <typename S>
struct HeadParams {
  std::size_t n_known = 0;
  std::size_t d = 0;
  std::vector<S> w_cls;
  std::vector<S> b_cls;
  S alpha_mix_raw{};  // α_mix = σ(raw)
  std::vector<S> obj_w1;
  std::vector<S> obj_b1;
  std::vector<S> obj_w2;
  S obj_b2{};
  double tau = 1.0;
  S theta_gamma{};   // γ = softplus(θ_γ)
  S theta_alpha{};   // α = σ(θ_α)
  S theta_lambda{};  // λ = softplus(θ_λ)
  S b_obj{};
};

/// Initial parameter values: classifier favoured in the mix (α = 0.9),
/// neutral gap exponent (γ = 1), suppression off (λ ≈ 0).
struct HeadInit {
  double alpha_mix_raw = 0.0;
  double theta_gamma = linalg::softplus_inverse(1.0);
  double theta_alpha = linalg::logit(0.9);
  double theta_lambda = -10.0;
  double b_obj = 0.0;
  double tau = 1.0;
};

template <typename S>
struct QueryFeature {
  std::vector<S> h;
  S norm;                  // ‖h‖₂ before any normalization
  std::vector<S> h_norm;   // unit direction of the standardized feature
  std::vector<S> h_cls;    // (1−α_mix)·h + α_mix·h_norm
  bool degenerate = false; // constant input; h_norm forced to zero
};

template <typename S>
struct LogitBundle {
  std::vector<S> z_known;
  S z_unk;
  S z_obj;
  std::vector<S> z_final;  // suppressed known logits then the final unknown
  S p_unk_obj;
  S p_final;
};

/// Parameter-free standardization then ℓ2 normalization. Invariant to
/// positive rescaling of h. A constant vector has no direction; it yields
/// the zero vector and sets *degenerate.
template <typename S>
std::vector<S> qnorm_normalize(std::span<const S> h, double eps = 1e-5,
                               bool* degenerate = nullptr) {
  const std::size_t d = h.size();
  if (d < 2) throw std::invalid_argument("qnorm_normalize: need dim >= 2");
  if (degenerate) *degenerate = false;
  const S mean = sum(h) / static_cast<double>(d);
  std::vector<S> centered;
  centered.reserve(d);
  for (const S& x : h) centered.push_back(x - mean);
  S var = centered[0] * centered[0];
  for (std::size_t i = 1; i < d; ++i) var = var + centered[i] * centered[i];
  var = var / static_cast<double>(d);
  const S inv_std = 1.0 / sqrt(var + eps);
  std::vector<S> ln;
  ln.reserve(d);
  for (const S& c : centered) ln.push_back(c * inv_std);
  S sq = ln[0] * ln[0];
  for (std::size_t i = 1; i < d; ++i) sq = sq + ln[i] * ln[i];
  const S nrm = sqrt(sq);
  if (value_of(nrm) <= 1e-9) {
    if (degenerate) *degenerate = true;
    std::vector<S> zero;
    zero.reserve(d);
    for (std::size_t i = 0; i < d; ++i) zero.push_back(constant_like(h[0], 0.0));
    return zero;
  }
  const S inv = 1.0 / nrm;
  for (S& x : ln) x = x * inv;
  return ln;
}

template <typename S>
std::vector<S> qnorm_mix(std::span<const S> h, std::span<const S> h_norm,
                         const S& alpha_mix) {
  if (h.size() != h_norm.size()) {
    throw std::invalid_argument("qnorm_mix: size mismatch");
  }
  std::vector<S> out;
  out.reserve(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    out.push_back((1.0 - alpha_mix) * h[i] + alpha_mix * h_norm[i]);
  }
  return out;
}

template <typename S>
QueryFeature<S> make_query_feature(std::vector<S> h,
                                   const HeadParams<S>& params,
                                   double eps = 1e-5) {
  QueryFeature<S> q;
  S sq = h[0] * h[0];
  for (std::size_t i = 1; i < h.size(); ++i) sq = sq + h[i] * h[i];
  // The tiny bias keeps the norm differentiable at the origin.
  q.norm = sqrt(sq + 1e-12);
  q.h_norm = qnorm_normalize<S>(h, eps, &q.degenerate);
  const S alpha_mix = sigmoid(params.alpha_mix_raw);
  q.h_cls = qnorm_mix<S>(h, q.h_norm, alpha_mix);
  q.h = std::move(h);
  return q;
}

/// Affine classifier. Returns n_known+1 logits; the last one is the raw
/// unknown logit.
template <typename S>
std::vector<S> cls_logits(std::span<const S> h_cls,
                          const HeadParams<S>& params) {
  const std::size_t rows = params.n_known + 1;
  if (h_cls.size() != params.d || params.w_cls.size() != rows * params.d ||
      params.b_cls.size() != rows) {
    throw std::invalid_argument("cls_logits: shape mismatch");
  }
  std::vector<S> z;
  z.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::span<const S> row(params.w_cls.data() + r * params.d, params.d);
    z.push_back(dot(row, h_cls) + params.b_cls[r]);
  }
  return z;
}

/// z_obj = f_obj(‖h‖₂) / (τ + ε).
template <typename S>
S objectness_logit(const S& norm, const HeadParams<S>& params,
                   double eps = 1e-6) {
  const double inv_temp = 1.0 / (params.tau + eps);
  if (params.obj_w1.empty()) return norm * inv_temp;  // identity bypass
  const std::size_t hidden = params.obj_w1.size();
  if (params.obj_b1.size() != hidden || params.obj_w2.size() != hidden) {
    throw std::invalid_argument("objectness_logit: MLP shape mismatch");
  }
  S out = params.obj_b2;
  for (std::size_t j = 0; j < hidden; ++j) {
    out = out + params.obj_w2[j] * tanh(params.obj_w1[j] * norm + params.obj_b1[j]);
  }
  return out * inv_temp;
}

/// z_known − λ·p_unk_obj with λ = softplus(θ_λ). Uniform across classes,
/// so the known-class argmax is preserved.
template <typename S>
std::vector<S> suppress_known(std::span<const S> z_known, const S& p_unk_obj,
                              const HeadParams<S>& params) {
  const S shift = softplus(params.theta_lambda) * p_unk_obj;
  std::vector<S> out;
  out.reserve(z_known.size());
  for (const S& z : z_known) out.push_back(z - shift);
  return out;
}

/// Unknown-probability mixer. Combines the calibrated known-confidence gap
/// with the objectness signal, mixes with the classifier's own unknown
/// probability, and converts back to a logit:
///   p_known_max = max_c σ(z_known,c)
///   g           = (1 − p_known_max)^γ,        γ = softplus(θ_γ)
///   p_unk_obj   = σ(z_obj)·g
///   p_unk_cls   = σ(z_unk + b_obj)
///   p_final     = α·p_unk_cls + (1−α)·p_unk_obj,  α = σ(θ_α)
///   z_unk_final = logit(clamp(p_final, 1e-7, 1−1e-7))
template <typename S>
LogitBundle<S> eumix_forward(std::span<const S> z_known, const S& z_unk,
                             const S& z_obj, const HeadParams<S>& params) {
  if (z_known.empty()) {
    throw std::invalid_argument("eumix_forward: need at least one known class");
  }
  std::vector<S> p_known;
  p_known.reserve(z_known.size());
  for (const S& z : z_known) p_known.push_back(sigmoid(z));
  // Clamp keeps the power-law gap differentiable when a known sigmoid
  // saturates to exactly 1 in double precision.
  const S p_known_max = clamp(max_of(std::span<const S>(p_known)), 0.0, 1.0 - 1e-12);
  const S gamma = softplus(params.theta_gamma);
  const S g = pow(1.0 - p_known_max, gamma);
  LogitBundle<S> out;
  out.p_unk_obj = sigmoid(z_obj) * g;
  const S p_unk_cls = sigmoid(z_unk + params.b_obj);
  const S alpha = sigmoid(params.theta_alpha);
  const S mixed = alpha * p_unk_cls + (1.0 - alpha) * out.p_unk_obj;
  out.p_final = clamp(mixed, 1e-7, 1.0 - 1e-7);
  const S z_unk_final = logit(out.p_final);
  out.z_known.assign(z_known.begin(), z_known.end());
  out.z_unk = z_unk;
  out.z_obj = z_obj;
  out.z_final = suppress_known<S>(z_known, out.p_unk_obj, params);
  out.z_final.push_back(z_unk_final);
  return out;
}

/// Classifier-only bypass: the unknown logit is z_unk + b_obj untouched and
/// the known logits pass through unsuppressed.
template <typename S>
LogitBundle<S> unknown_bypass(std::span<const S> z_known, const S& z_unk,
                              const S& z_obj, const HeadParams<S>& params) {
  LogitBundle<S> out;
  out.z_known.assign(z_known.begin(), z_known.end());
  out.z_unk = z_unk;
  out.z_obj = z_obj;
  out.p_unk_obj = constant_like(z_unk, 0.0);
  const S z_unk_final = z_unk + params.b_obj;
  out.p_final = clamp(sigmoid(z_unk_final), 1e-7, 1.0 - 1e-7);
  out.z_final.assign(z_known.begin(), z_known.end());
  out.z_final.push_back(z_unk_final);
  return out;
}

/// ‖h‖₂ with a tiny bias keeping the norm differentiable at the origin.
template <typename S>
S feature_norm(std::span<const S> h) {
  S sq = h[0] * h[0];
  for (std::size_t i = 1; i < h.size(); ++i) sq = sq + h[i] * h[i];
  return sqrt(sq + 1e-12);
}

/// Full per-query head pipeline: norm mixing, classifier, objectness, then
/// the unknown mixer (or its bypass).
template <typename S>
LogitBundle<S> heads_forward(std::vector<S> h, const HeadParams<S>& params,
                             bool mix_unknown = true, double eps_norm = 1e-5,
                             double eps_obj = 1e-6) {
  QueryFeature<S> q = make_query_feature<S>(std::move(h), params, eps_norm);
  const std::vector<S> z = cls_logits<S>(q.h_cls, params);
  std::span<const S> z_known(z.data(), params.n_known);
  const S& z_unk = z.back();
  const S z_obj = objectness_logit<S>(q.norm, params, eps_obj);
  return mix_unknown ? eumix_forward<S>(z_known, z_unk, z_obj, params)
                     : unknown_bypass<S>(z_known, z_unk, z_obj, params);
}

/// Two-stream variant: the classifier reads h_cls while the objectness MLP
/// reads a norm measured on a different feature vector. Used when
/// classification features are task-adapted but the magnitude signal must
/// stay class-agnostic.
template <typename S>
LogitBundle<S> heads_forward(std::vector<S> h_cls, const S& obj_norm,
                             const HeadParams<S>& params,
                             bool mix_unknown = true, double eps_norm = 1e-5,
                             double eps_obj = 1e-6) {
  QueryFeature<S> q = make_query_feature<S>(std::move(h_cls), params, eps_norm);
  const std::vector<S> z = cls_logits<S>(q.h_cls, params);
  std::span<const S> z_known(z.data(), params.n_known);
  const S& z_unk = z.back();
  const S z_obj = objectness_logit<S>(obj_norm, params, eps_obj);
  return mix_unknown ? eumix_forward<S>(z_known, z_unk, z_obj, params)
                     : unknown_bypass<S>(z_known, z_unk, z_obj, params);
}

}  // namespace ewod::heads
