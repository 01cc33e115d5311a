#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ewod/adapters/adapter.hpp"
#include "ewod/heads/heads.hpp"
#include "ewod/linalg/hungarian.hpp"
#include "ewod/linalg/matrix.hpp"
#include "ewod/sim/tape.hpp"
#include "ewod/sim/world.hpp"

// Toy query-based detector: Q learned queries cross-attend over region
// features through adapter-equipped linear projections, each query feature
// feeds the detection heads plus a box head and a background logit.
//
// The feature path splits into two streams behind a shared attention:
//   localization stream  value/out/ffn at their pretrained base weights,
//                        feeding the box head, the background logit and
//                        the objectness norm. Class-agnostic by training
//                        (pseudo-class pretraining) and frozen afterwards,
//                        so boxes and objectness keep working on classes
//                        no task ever labeled.
//   classification stream the same layers with the task adapters applied,
//                        feeding the classifier and the unknown mixer.
// Task training that touches the shared localization machinery collapses
// it onto the classes seen so far; the split keeps plasticity where it is
// needed (what things are) and rigidity where it is not (where they are).
//
// The forward pass is templated on the scalar type: plain doubles for
// inference and oracles, tape variables for training. Frozen base weights
// and scene features stay doubles in both cases, so they never receive
// gradient entries.

namespace ewod::sim {

// Double overloads so the templated forward compiles for plain scalars.
using linalg::sigmoid;
using linalg::softplus;
using std::abs;
using std::exp;
using std::log;
using std::tanh;

enum class TrainMode { kDualLora, kFinetune, kFrozen };

TrainMode mode_from_string(const std::string& s);
std::string to_string(TrainMode mode);

struct DetectorConfig {
  std::size_t d = 32;          // model width
  std::size_t d_feat = 32;     // region feature width
  std::size_t num_queries = 10;
  std::size_t rank = 4;        // adapter rank
  std::size_t k_total = 0;     // class rows excluding the unknown row
  std::size_t obj_hidden = 16; // objectness MLP width
  // Gain on the box coordinates in the key and value inputs. Box
  // coordinates live in [0, 1] while features have norm ~4, so without
  // amplification the queries can neither route nor decode by position.
  double box_gain = 6.0;
  // Multiplier on attention scores. Sharper attention blurs predicted
  // boxes less, since a query's box is decoded from its attention-weighted
  // value mix.
  double attn_temp = 2.0;
};

/// One adapter-equipped linear layer: frozen base plus adapter pair.
struct LoraLinear {
  std::string name;
  linalg::Matrix w0;
  adapters::AdapterState adapter;
};

struct DetectorParams {
  DetectorConfig cfg;
  LoraLinear w_q;    // d × d, applied to query embeddings
  LoraLinear w_k;    // d × (d_feat + 4), applied to concat(feature, box)
  LoraLinear w_v;    // d × (d_feat + 4)
  LoraLinear w_out;  // d × d
  LoraLinear w_ffn;  // d × d, h = o + tanh(w_ffn · o)

  linalg::Matrix query_emb;  // Q × d

  // Head parameters over the full class set; forward slices the rows that
  // are active for a given task. Row k_total of cls_w is the unknown row.
  linalg::Matrix cls_w;       // (k_total + 1) × d
  std::vector<double> cls_b;  // k_total + 1
  double alpha_mix_raw = 0.0;
  std::vector<double> obj_w1, obj_b1, obj_w2;
  double obj_b2 = 0.0;
  double tau = 1.0;
  double theta_gamma = 0.0;
  double theta_alpha = 0.0;
  double theta_lambda = 0.0;
  double b_obj = 0.0;

  linalg::Matrix box_w;  // 4 × d
  std::array<double, 4> box_b{};
  // Background logit = bg_a · z_obj + bg_b. A linear head on the query
  // feature cannot express "no object here": with class prototypes spread
  // over all directions the feature mean is the same for objects and
  // clutter, only the magnitude differs, and the objectness logit already
  // encodes that magnitude.
  double bg_a = -1.0;
  double bg_b = 0.0;

  std::array<LoraLinear*, 5> layers() {
    return {&w_q, &w_k, &w_v, &w_out, &w_ffn};
  }
  std::array<const LoraLinear*, 5> layers() const {
    return {&w_q, &w_k, &w_v, &w_out, &w_ffn};
  }
};

/// Seeded initialization: Gaussian frozen bases, zero adapters, zero class
/// and background weights, small random query embeddings, objectness MLP
/// and box head seeded for symmetry breaking, head scalars at defaults.
DetectorParams init_detector(const DetectorConfig& cfg, std::uint64_t seed);

std::size_t total_param_count(const DetectorParams& params);
std::size_t trainable_param_count(const DetectorParams& params, TrainMode mode);

/// Tape leaves bound to their double storage, so a gradient step can write
/// straight back into DetectorParams.
struct TrainRegistry {
  std::vector<std::pair<double*, Var>> entries;

  Var bind(Tape& tape, double& slot) {
    const Var v = tape.leaf(slot);
    entries.push_back({&slot, v});
    return v;
  }

  /// One SGD step; throws on a non-finite gradient.
  void sgd_step(const Tape& tape, double lr);
};

/// Effective view of one linear layer: constant dense base (frozen weights
/// plus the folded aggregate delta) and, when the task delta is trainable,
/// its low-rank factors in the working scalar type.
template <typename S>
struct LayerView {
  linalg::Matrix base;
  std::vector<S> b;  // d_out × r, row-major
  std::vector<S> a;  // r × d_in, row-major
  std::size_t d_out = 0, d_in = 0, r = 0;
  bool has_delta = false;
};

template <typename S>
struct DetectorView {
  const DetectorConfig* cfg = nullptr;
  // Attention projections, shared by both streams.
  LayerView<S> w_q, w_k;
  // Localization stream (boxes, background logit, objectness norm).
  LayerView<S> w_v_loc, w_out_loc, w_ffn_loc;
  // Classification stream (classifier and unknown mixer input).
  LayerView<S> w_v_cls, w_out_cls, w_ffn_cls;
  std::vector<std::vector<S>> query_emb;
  heads::HeadParams<S> head;
  std::vector<int> active_ids;  // class id of each known head row
  std::vector<std::vector<S>> box_w;
  std::array<S, 4> box_b;
  S bg_a, bg_b;
  S ref;  // any scalar on the right tape, for constant_like
};

/// Inference view: active known rows are the given class ids.
DetectorView<double> make_eval_view(const DetectorParams& params,
                                    const std::vector<int>& active_ids);

/// Training view: binds every trainable slot as a tape leaf. Which parts
/// train depends on the mode; frozen bases and the aggregate delta are
/// folded into the constant base either way.
///
/// During base pretraining (pretrain_phase) the attention projections,
/// both stream copies of value/out/ffn, the query embeddings, the box
/// head, the background head and the objectness MLP all train; class rows
/// and mixer scalars do not. During task training the assignment flips:
/// only the classification-stream adapters, the class rows and the mixer
/// scalars train. Everything localization-related is class-agnostic, and
/// updating it on task data specializes it to the classes seen so far,
/// which silently erases unknown objects.
DetectorView<Var> make_train_view(DetectorParams& params,
                                  const std::vector<int>& active_ids,
                                  Tape& tape, TrainRegistry& registry,
                                  TrainMode mode, bool pretrain_phase = false);

/// y = base·x + B·(A·x) for a variable-valued input.
template <typename S>
std::vector<S> apply_layer(const LayerView<S>& layer, std::span<const S> x) {
  if (x.size() != layer.d_in) {
    throw std::invalid_argument("apply_layer: input size mismatch");
  }
  std::vector<S> t;
  if (layer.has_delta) {
    t.reserve(layer.r);
    for (std::size_t r = 0; r < layer.r; ++r) {
      t.push_back(dot(std::span<const S>(layer.a.data() + r * layer.d_in,
                                         layer.d_in),
                      x));
    }
  }
  std::vector<S> y;
  y.reserve(layer.d_out);
  for (std::size_t i = 0; i < layer.d_out; ++i) {
    S yi = weighted_sum(
        std::span<const double>(layer.base.row(i), layer.d_in), x);
    if (layer.has_delta) {
      yi = yi + dot(std::span<const S>(layer.b.data() + i * layer.r, layer.r),
                    std::span<const S>(t.data(), t.size()));
    }
    y.push_back(yi);
  }
  return y;
}

/// Same for a constant input: the base term collapses to plain arithmetic.
template <typename S>
std::vector<S> apply_layer_const(const LayerView<S>& layer,
                                 std::span<const double> x, const S& ref) {
  if (x.size() != layer.d_in) {
    throw std::invalid_argument("apply_layer: input size mismatch");
  }
  const std::vector<double> base_y = linalg::matvec(layer.base, x);
  std::vector<S> y;
  y.reserve(layer.d_out);
  if (!layer.has_delta) {
    for (double v : base_y) y.push_back(constant_like(ref, v));
    return y;
  }
  std::vector<S> t;
  t.reserve(layer.r);
  for (std::size_t r = 0; r < layer.r; ++r) {
    t.push_back(weighted_sum(
        x, std::span<const S>(layer.a.data() + r * layer.d_in, layer.d_in)));
  }
  for (std::size_t i = 0; i < layer.d_out; ++i) {
    y.push_back(base_y[i] +
                dot(std::span<const S>(layer.b.data() + i * layer.r, layer.r),
                    std::span<const S>(t.data(), t.size())));
  }
  return y;
}

template <typename S>
struct ForwardOutput {
  std::vector<heads::LogitBundle<S>> bundles;  // per query
  std::vector<std::array<S, 4>> boxes;         // sigmoid-squashed
  std::vector<S> bg_logits;
  // ‖Σ_j attn_j · feature_j‖₂: the magnitude of the raw feature mass a
  // query attends to, input of the objectness MLP. Measured before any
  // projection so it cannot be specialized away by task training, and so
  // the box-coordinate gain in the value inputs does not drown it.
  std::vector<S> obj_norms;
};

/// Full forward pass over one scene.
template <typename S>
ForwardOutput<S> forward_scene(const DetectorView<S>& view, const Scene& scene,
                               bool mix_unknown = true) {
  const DetectorConfig& cfg = *view.cfg;
  const std::size_t n_regions = scene.regions.size();
  if (n_regions == 0) throw std::invalid_argument("forward_scene: no regions");
  const double scale = cfg.attn_temp / std::sqrt(static_cast<double>(cfg.d));

  // Keys and per-stream values from concat(feature, box); all are scene
  // constants.
  std::vector<std::vector<S>> keys, v_loc, v_cls;
  keys.reserve(n_regions);
  v_loc.reserve(n_regions);
  v_cls.reserve(n_regions);
  std::vector<double> u(cfg.d_feat + 4);
  for (const Region& region : scene.regions) {
    if (region.feature.size() != cfg.d_feat) {
      throw std::invalid_argument("forward_scene: feature width mismatch");
    }
    std::copy(region.feature.begin(), region.feature.end(), u.begin());
    for (int k = 0; k < 4; ++k) u[cfg.d_feat + k] = cfg.box_gain * region.box[k];
    keys.push_back(apply_layer_const(view.w_k, u, view.ref));
    for (int k = 0; k < 4; ++k) {
      u[cfg.d_feat + k] = cfg.value_box_gain * region.box[k];
    }
    v_loc.push_back(apply_layer_const(view.w_v_loc, u, view.ref));
    v_cls.push_back(apply_layer_const(view.w_v_cls, u, view.ref));
  }

  ForwardOutput<S> out;
  std::vector<S> terms(n_regions, view.ref);
  for (std::size_t qi = 0; qi < cfg.num_queries; ++qi) {
    const std::vector<S>& emb = view.query_emb[qi];
    const std::vector<S> q =
        apply_layer(view.w_q, std::span<const S>(emb.data(), emb.size()));

    // Softmax attention over regions. The max shift is a constant, which
    // leaves both values and gradients unchanged.
    std::vector<S> scores;
    scores.reserve(n_regions);
    for (std::size_t j = 0; j < n_regions; ++j) {
      scores.push_back(dot(std::span<const S>(q.data(), q.size()),
                           std::span<const S>(keys[j].data(), cfg.d)) *
                       scale);
    }
    double m = value_of(scores[0]);
    for (const S& s : scores) m = std::max(m, value_of(s));
    std::vector<S> weights;
    weights.reserve(n_regions);
    for (const S& s : scores) weights.push_back(exp(s - m));
    const S denom = sum(std::span<const S>(weights.data(), weights.size()));
    for (S& w : weights) w = w / denom;

    // Attention-weighted value mix, then out/ffn with a residual stream:
    // the query embedding keeps ‖h‖ (and its per-channel variance) bounded
    // below, so the standardized classifier input stays well conditioned
    // for queries that attend only background.
    const auto stream_tail = [&](const std::vector<std::vector<S>>& values,
                                 const LayerView<S>& w_out,
                                 const LayerView<S>& w_ffn) {
      std::vector<S> context;
      context.reserve(cfg.d);
      for (std::size_t l = 0; l < cfg.d; ++l) {
        for (std::size_t j = 0; j < n_regions; ++j) {
          terms[j] = weights[j] * values[j][l];
        }
        context.push_back(sum(std::span<const S>(terms.data(), terms.size())));
      }
      const std::vector<S> o = apply_layer(
          w_out, std::span<const S>(context.data(), context.size()));
      std::vector<S> r;
      r.reserve(cfg.d);
      for (std::size_t l = 0; l < cfg.d; ++l) r.push_back(emb[l] + o[l]);
      const std::vector<S> f =
          apply_layer(w_ffn, std::span<const S>(r.data(), r.size()));
      std::vector<S> h;
      h.reserve(cfg.d);
      for (std::size_t l = 0; l < cfg.d; ++l) h.push_back(r[l] + tanh(f[l]));
      return h;
    };
    const std::vector<S> h_loc =
        stream_tail(v_loc, view.w_out_loc, view.w_ffn_loc);
    std::vector<S> h_cls = stream_tail(v_cls, view.w_out_cls, view.w_ffn_cls);

    std::array<S, 4> box{view.ref, view.ref, view.ref, view.ref};
    for (int k = 0; k < 4; ++k) {
      box[k] = sigmoid(dot(std::span<const S>(view.box_w[k].data(), cfg.d),
                           std::span<const S>(h_loc.data(), h_loc.size())) +
                       view.box_b[k]);
    }
    out.bg_logits.push_back(dot(std::span<const S>(view.bg_w.data(), cfg.d),
                                std::span<const S>(h_loc.data(), h_loc.size())) +
                            view.bg_b);
    out.boxes.push_back(box);
    const S norm_loc =
        heads::feature_norm(std::span<const S>(h_loc.data(), h_loc.size()));
    out.obj_norms.push_back(norm_loc);
    out.bundles.push_back(heads::heads_forward<S>(std::move(h_cls), norm_loc,
                                                  view.head, mix_unknown));
  }
  return out;
}

struct LossWeights {
  double w_cls = 1.0;
  double w_l1 = 5.0;
};

/// Hungarian matching on cost = w_cls·(1 − p_gt) + w_l1·‖box − gt‖₁, then
/// cross-entropy over active classes ∪ {unknown} ∪ {background} (matched
/// queries target their class, unmatched the background; the unknown row is
/// never a target) plus the weighted L1 box loss on matched pairs.
template <typename S>
S match_and_loss(const ForwardOutput<S>& out, const std::vector<GtObject>& gts,
                 const DetectorView<S>& view, const LossWeights& weights,
                 std::vector<std::pair<std::size_t, std::size_t>>* matches_out =
                     nullptr) {
  const std::size_t n_query = out.bundles.size();
  const std::size_t n_known = view.active_ids.size();
  const std::size_t bg_index = n_known + 1;
  if (n_query == 0) throw std::invalid_argument("match_and_loss: no queries");

  // Class-row lookup for ground-truth ids.
  const auto row_of = [&](int class_id) {
    for (std::size_t r = 0; r < n_known; ++r) {
      if (view.active_ids[r] == class_id) return r;
    }
    throw std::invalid_argument("match_and_loss: class " +
                                std::to_string(class_id) +
                                " has no active head row");
  };

  // Detached softmax probabilities for the matching cost.
  std::vector<std::vector<double>> probs(n_query);
  for (std::size_t qi = 0; qi < n_query; ++qi) {
    std::vector<double> z;
    z.reserve(n_known + 2);
    for (const S& v : out.bundles[qi].z_final) z.push_back(value_of(v));
    z.push_back(value_of(out.bg_logits[qi]));
    const double m = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double& v : z) {
      v = std::exp(v - m);
      total += v;
    }
    for (double& v : z) v /= total;
    probs[qi] = std::move(z);
  }

  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (gt, query)
  if (!gts.empty()) {
    if (gts.size() > n_query) {
      throw std::invalid_argument("match_and_loss: more objects than queries");
    }
    linalg::Matrix cost(gts.size(), n_query);
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const std::size_t row = row_of(gts[g].class_id);
      for (std::size_t qi = 0; qi < n_query; ++qi) {
        double l1 = 0.0;
        for (int k = 0; k < 4; ++k) {
          l1 += std::abs(value_of(out.boxes[qi][k]) - gts[g].box[k]);
        }
        cost(g, qi) = weights.w_cls * (1.0 - probs[qi][row]) +
                      weights.w_l1 * l1;
      }
    }
    matches = linalg::hungarian_assign(cost).pairs;
  }
  if (matches_out) *matches_out = matches;

  std::vector<std::size_t> target(n_query, bg_index);
  for (const auto& [g, qi] : matches) target[qi] = row_of(gts[g].class_id);

  // Cross-entropy with a constant max shift inside logsumexp.
  std::vector<S> ce_terms;
  ce_terms.reserve(n_query);
  for (std::size_t qi = 0; qi < n_query; ++qi) {
    std::vector<S> z(out.bundles[qi].z_final.begin(),
                     out.bundles[qi].z_final.end());
    z.push_back(out.bg_logits[qi]);
    double m = value_of(z[0]);
    for (const S& v : z) m = std::max(m, value_of(v));
    std::vector<S> e;
    e.reserve(z.size());
    for (const S& v : z) e.push_back(exp(v - m));
    const S lse = log(sum(std::span<const S>(e.data(), e.size()))) + m;
    ce_terms.push_back(lse - z[target[qi]]);
  }
  S loss = sum(std::span<const S>(ce_terms.data(), ce_terms.size())) /
           static_cast<double>(n_query);

  if (!matches.empty()) {
    std::vector<S> l1_terms;
    l1_terms.reserve(matches.size() * 4);
    for (const auto& [g, qi] : matches) {
      for (int k = 0; k < 4; ++k) {
        l1_terms.push_back(abs(out.boxes[qi][k] - gts[g].box[k]));
      }
    }
    loss = loss + weights.w_l1 *
                      sum(std::span<const S>(l1_terms.data(), l1_terms.size())) /
                      static_cast<double>(matches.size());
  }
  return loss;
}

struct TrainConfig {
  double lr = 1e-2;
  std::size_t epochs = 200;
  TrainMode mode = TrainMode::kDualLora;
  LossWeights weights;
  std::uint64_t seed = 0;         // drives the task-delta re-init
  std::vector<int> active_ids;    // classes receiving supervision
  bool mix_unknown = true;
};

struct TrainStats {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::size_t steps = 0;
};

/// Plain SGD over epochs × scenes in fixed order; deterministic given the
/// seed. Throws on a non-finite loss with the offending epoch and scene.
TrainStats train_task(DetectorParams& params, const std::vector<Scene>& scenes,
                      const TrainConfig& cfg);

/// Mean detection loss over scenes at the current parameters (no updates).
double mean_loss(const DetectorParams& params, const std::vector<Scene>& scenes,
                 const std::vector<int>& active_ids, const LossWeights& weights,
                 bool mix_unknown = true);

struct PretrainConfig {
  std::size_t scenes = 160;
  std::size_t epochs = 60;
  double lr = 1e-2;
  std::size_t pseudo_classes = 8;
  std::size_t objects_per_scene = 3;
  double w_l1 = 5.0;
  double w_bg = 1.0;   // weight of the object/background cross-entropy
  double w_obj = 1.0;  // weight of the objectness-logit cross-entropy
  // Scenes cycle through this many random feature distortions (see
  // World::generate_pretrain_scene); 1 trains on raw features only.
  std::size_t distortions = 8;
  std::uint64_t seed = 0;
};

/// Class-agnostic pretraining of the base: attention routing, box decoding,
/// object/background discrimination and the norm-based objectness MLP are
/// trained on pseudo-class scenes (random prototypes disjoint from any
/// schedule, under random feature-space distortions disjoint from any
/// schedule domain) and the learned correction is folded into the base
/// weights. Class rows, mixer scalars and adapters are untouched, so the
/// pretrained detector knows generic objectness but no class.
void pretrain_base(DetectorParams& params, const World& world,
                   const PretrainConfig& cfg);

}  // namespace ewod::sim
