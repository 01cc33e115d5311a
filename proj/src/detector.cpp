#include "ewod/sim/detector.hpp"

#include <cmath>
#include <stdexcept>

#include "ewod/rng.hpp"

namespace ewod::sim {

TrainMode mode_from_string(const std::string& s) {
  if (s == "dual-lora") return TrainMode::kDualLora;
  if (s == "finetune") return TrainMode::kFinetune;
  if (s == "frozen") return TrainMode::kFrozen;
  throw std::invalid_argument("unknown mode '" + s +
                              "' (expected dual-lora, finetune or frozen)");
}

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kDualLora: return "dual-lora";
    case TrainMode::kFinetune: return "finetune";
    case TrainMode::kFrozen: return "frozen";
  }
  return "?";
}

namespace {

linalg::Matrix gaussian_matrix(Rng rng, std::size_t rows, std::size_t cols,
                               double scale) {
  linalg::Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.gaussian();
  return m;
}

LoraLinear make_layer(const Rng& root, const std::string& name,
                      std::size_t d_out, std::size_t d_in, std::size_t rank,
                      double scale, bool identity = false) {
  LoraLinear layer;
  layer.name = name;
  layer.w0 = gaussian_matrix(root.stream("w0-" + name), d_out, d_in, scale);
  if (identity) {
    for (std::size_t i = 0; i < std::min(d_out, d_in); ++i) {
      layer.w0(i, i) += 1.0;
    }
  }
  layer.adapter = adapters::AdapterState::fresh(d_out, d_in, rank);
  return layer;
}

bool all_zero(const linalg::Matrix& m) {
  for (double v : m.data()) {
    if (v != 0.0) return false;
  }
  return true;
}

}  // namespace

DetectorParams init_detector(const DetectorConfig& cfg, std::uint64_t seed) {
  if (cfg.d < 2 || cfg.d_feat < 1 || cfg.num_queries < 1 || cfg.k_total < 1) {
    throw std::invalid_argument("init_detector: degenerate dimensions");
  }
  if (cfg.rank > cfg.d) {
    throw std::invalid_argument("init_detector: rank exceeds model width");
  }
  const Rng root(seed);
  DetectorParams p;
  p.cfg = cfg;
  // Value and output projections start as identity plus noise so region
  // features reach the heads unmodified; adapters then only have to learn
  // the domain correction instead of rebuilding the feature path.
  const double qk_scale = 1.0 / std::sqrt(double(cfg.d));
  p.w_q = make_layer(root, "q", cfg.d, cfg.d, cfg.rank, qk_scale);
  p.w_k = make_layer(root, "k", cfg.d, cfg.d_feat + 4, cfg.rank,
                     1.0 / std::sqrt(double(cfg.d_feat + 4)));
  p.w_v = make_layer(root, "v", cfg.d, cfg.d_feat + 4, cfg.rank, 0.05, true);
  p.w_out = make_layer(root, "out", cfg.d, cfg.d, cfg.rank, 0.05, true);
  p.w_ffn = make_layer(root, "ffn", cfg.d, cfg.d, cfg.rank,
                       0.1 / std::sqrt(double(cfg.d)));

  p.query_emb = gaussian_matrix(root.stream("query-emb"),
                                cfg.num_queries, cfg.d, 0.5);

  p.cls_w = linalg::Matrix(cfg.k_total + 1, cfg.d);
  p.cls_b.assign(cfg.k_total + 1, 0.0);

  const heads::HeadInit defaults;
  p.alpha_mix_raw = defaults.alpha_mix_raw;
  p.theta_gamma = defaults.theta_gamma;
  p.theta_alpha = defaults.theta_alpha;
  p.theta_lambda = defaults.theta_lambda;
  p.b_obj = defaults.b_obj;
  p.tau = defaults.tau;

  // Query-feature norms concentrate around 3-5 with the residual stream,
  // so the tanh units are centered there and kept off saturation.
  Rng obj = root.stream("obj-mlp");
  p.obj_w1.resize(cfg.obj_hidden);
  p.obj_b1.resize(cfg.obj_hidden);
  p.obj_w2.resize(cfg.obj_hidden);
  for (double& v : p.obj_w1) v = 0.3 * obj.gaussian();
  for (std::size_t i = 0; i < p.obj_b1.size(); ++i) {
    p.obj_b1[i] = -3.5 * p.obj_w1[i];
  }
  for (double& v : p.obj_w2) {
    v = obj.gaussian() / std::sqrt(std::max<double>(1.0, cfg.obj_hidden));
  }
  p.obj_b2 = 0.0;

  p.box_w = gaussian_matrix(root.stream("box"), 4, cfg.d,
                            0.5 / std::sqrt(double(cfg.d)));
  p.box_b.fill(0.0);
  p.bg_w.assign(cfg.d, 0.0);
  p.bg_b = 0.0;
  return p;
}

std::size_t total_param_count(const DetectorParams& params) {
  std::size_t n = 0;
  for (const LoraLinear* layer : params.layers()) {
    n += layer->w0.rows() * layer->w0.cols();
    n += 2 * layer->adapter.rank() *
         (layer->adapter.agg.d_out() + layer->adapter.agg.d_in());
  }
  n += params.query_emb.rows() * params.query_emb.cols();
  n += params.cls_w.rows() * params.cls_w.cols() + params.cls_b.size();
  n += 5;  // alpha_mix_raw, theta_gamma, theta_alpha, theta_lambda, b_obj
  n += params.obj_w1.size() + params.obj_b1.size() + params.obj_w2.size() + 1;
  n += params.box_w.rows() * params.box_w.cols() + 4;
  n += params.bg_w.size() + 1;
  return n;
}

std::size_t trainable_param_count(const DetectorParams& params,
                                  TrainMode mode) {
  std::size_t n = 0;
  if (mode != TrainMode::kFrozen) {
    // Task adapters exist on the classification stream only (value, out,
    // ffn); attention stays at its pretrained base.
    for (const LoraLinear* layer : {&params.w_v, &params.w_out, &params.w_ffn}) {
      n += layer->adapter.rank() *
           (layer->adapter.task.d_out() + layer->adapter.task.d_in());
    }
  }
  n += params.cls_w.rows() * params.cls_w.cols() + params.cls_b.size();
  n += 5;  // alpha_mix_raw, theta_gamma, theta_alpha, theta_lambda, b_obj
  // Query embeddings, box head, background head and objectness MLP are
  // pretrain-only; they stay frozen across tasks.
  return n;
}

void TrainRegistry::sgd_step(const Tape& tape, double lr) {
  for (const auto& [slot, var] : entries) {
    const double g = tape.grad(var);
    if (!std::isfinite(g)) {
      throw std::runtime_error("sgd_step: non-finite gradient");
    }
    *slot -= lr * g;
  }
}

namespace {

std::vector<std::size_t> head_rows(const DetectorParams& params,
                                   const std::vector<int>& active_ids) {
  if (active_ids.empty()) {
    throw std::invalid_argument("detector view: no active classes");
  }
  std::vector<std::size_t> rows;
  rows.reserve(active_ids.size() + 1);
  for (int id : active_ids) {
    if (id < 1 || static_cast<std::size_t>(id) > params.cfg.k_total) {
      throw std::invalid_argument("detector view: class id " +
                                  std::to_string(id) + " out of range");
    }
    rows.push_back(static_cast<std::size_t>(id) - 1);
  }
  rows.push_back(params.cfg.k_total);  // unknown row
  return rows;
}

linalg::Matrix effective_base(const LoraLinear& layer) {
  if (layer.adapter.rank() == 0 || all_zero(layer.adapter.agg.b)) {
    return layer.w0;
  }
  return linalg::add(layer.w0, layer.adapter.agg.dense());
}

LayerView<double> eval_layer_view(const LoraLinear& layer) {
  LayerView<double> v;
  v.base = effective_base(layer);
  v.d_out = layer.w0.rows();
  v.d_in = layer.w0.cols();
  v.r = layer.adapter.rank();
  v.has_delta = v.r > 0 && !all_zero(layer.adapter.task.b);
  if (v.has_delta) {
    const auto bs = layer.adapter.task.b.data();
    const auto as = layer.adapter.task.a.data();
    v.b.assign(bs.begin(), bs.end());
    v.a.assign(as.begin(), as.end());
  }
  return v;
}

/// The layer at its pretrained base weights, ignoring adapters entirely.
template <typename S>
LayerView<S> base_layer_view(const LoraLinear& layer) {
  LayerView<S> v;
  v.base = layer.w0;
  v.d_out = layer.w0.rows();
  v.d_in = layer.w0.cols();
  v.r = 0;
  v.has_delta = false;
  return v;
}

LayerView<Var> train_layer_view(LoraLinear& layer, Tape& tape,
                                TrainRegistry& registry, bool trainable) {
  LayerView<Var> v;
  v.base = effective_base(layer);
  v.d_out = layer.w0.rows();
  v.d_in = layer.w0.cols();
  v.r = layer.adapter.rank();
  v.has_delta = trainable && v.r > 0;
  if (v.has_delta) {
    for (double& x : layer.adapter.task.b.data()) {
      v.b.push_back(registry.bind(tape, x));
    }
    for (double& x : layer.adapter.task.a.data()) {
      v.a.push_back(registry.bind(tape, x));
    }
  } else if (v.r > 0 && !all_zero(layer.adapter.task.b)) {
    // Not trainable, but an existing task delta still shapes the output.
    v.base = linalg::add(v.base, layer.adapter.task.dense());
  }
  return v;
}

}  // namespace

DetectorView<double> make_eval_view(const DetectorParams& params,
                                    const std::vector<int>& active_ids) {
  const std::vector<std::size_t> rows = head_rows(params, active_ids);
  DetectorView<double> v;
  v.cfg = &params.cfg;
  v.w_q = base_layer_view<double>(params.w_q);
  v.w_k = base_layer_view<double>(params.w_k);
  v.w_v_loc = base_layer_view<double>(params.w_v);
  v.w_out_loc = base_layer_view<double>(params.w_out);
  v.w_ffn_loc = base_layer_view<double>(params.w_ffn);
  v.w_v_cls = eval_layer_view(params.w_v);
  v.w_out_cls = eval_layer_view(params.w_out);
  v.w_ffn_cls = eval_layer_view(params.w_ffn);
  for (std::size_t i = 0; i < params.cfg.num_queries; ++i) {
    v.query_emb.emplace_back(params.query_emb.row(i),
                             params.query_emb.row(i) + params.cfg.d);
  }
  v.head.n_known = active_ids.size();
  v.head.d = params.cfg.d;
  for (std::size_t r : rows) {
    v.head.w_cls.insert(v.head.w_cls.end(), params.cls_w.row(r),
                        params.cls_w.row(r) + params.cfg.d);
    v.head.b_cls.push_back(params.cls_b[r]);
  }
  v.head.alpha_mix_raw = params.alpha_mix_raw;
  v.head.obj_w1 = params.obj_w1;
  v.head.obj_b1 = params.obj_b1;
  v.head.obj_w2 = params.obj_w2;
  v.head.obj_b2 = params.obj_b2;
  v.head.tau = params.tau;
  v.head.theta_gamma = params.theta_gamma;
  v.head.theta_alpha = params.theta_alpha;
  v.head.theta_lambda = params.theta_lambda;
  v.head.b_obj = params.b_obj;
  v.active_ids = active_ids;
  for (int k = 0; k < 4; ++k) {
    v.box_w.emplace_back(params.box_w.row(k), params.box_w.row(k) + params.cfg.d);
    v.box_b[k] = params.box_b[k];
  }
  v.bg_w = params.bg_w;
  v.bg_b = params.bg_b;
  v.ref = 0.0;
  return v;
}

DetectorView<Var> make_train_view(DetectorParams& params,
                                  const std::vector<int>& active_ids,
                                  Tape& tape, TrainRegistry& registry,
                                  TrainMode mode, bool pretrain_phase) {
  const std::vector<std::size_t> rows = head_rows(params, active_ids);
  DetectorView<Var> v;
  v.cfg = &params.cfg;
  v.ref = tape.leaf(0.0);
  // Binds are exact: a slot joins the registry iff it trains in this phase.
  const auto bind_if = [&](bool trains, double& slot) {
    return trains ? registry.bind(tape, slot) : tape.leaf(slot);
  };
  if (pretrain_phase) {
    // All five linears train through their (full-rank throwaway) adapters.
    // Both streams share the same views, and therefore the same leaves.
    v.w_q = train_layer_view(params.w_q, tape, registry, true);
    v.w_k = train_layer_view(params.w_k, tape, registry, true);
    v.w_v_loc = train_layer_view(params.w_v, tape, registry, true);
    v.w_out_loc = train_layer_view(params.w_out, tape, registry, true);
    v.w_ffn_loc = train_layer_view(params.w_ffn, tape, registry, true);
    v.w_v_cls = v.w_v_loc;
    v.w_out_cls = v.w_out_loc;
    v.w_ffn_cls = v.w_ffn_loc;
  } else {
    const bool adapters_train = mode != TrainMode::kFrozen;
    v.w_q = base_layer_view<Var>(params.w_q);
    v.w_k = base_layer_view<Var>(params.w_k);
    v.w_v_loc = base_layer_view<Var>(params.w_v);
    v.w_out_loc = base_layer_view<Var>(params.w_out);
    v.w_ffn_loc = base_layer_view<Var>(params.w_ffn);
    v.w_v_cls = train_layer_view(params.w_v, tape, registry, adapters_train);
    v.w_out_cls = train_layer_view(params.w_out, tape, registry, adapters_train);
    v.w_ffn_cls = train_layer_view(params.w_ffn, tape, registry, adapters_train);
  }
  for (std::size_t i = 0; i < params.cfg.num_queries; ++i) {
    std::vector<Var> row;
    row.reserve(params.cfg.d);
    for (std::size_t j = 0; j < params.cfg.d; ++j) {
      row.push_back(bind_if(pretrain_phase, params.query_emb(i, j)));
    }
    v.query_emb.push_back(std::move(row));
  }
  v.head.n_known = active_ids.size();
  v.head.d = params.cfg.d;
  for (std::size_t r : rows) {
    for (std::size_t j = 0; j < params.cfg.d; ++j) {
      v.head.w_cls.push_back(bind_if(!pretrain_phase, params.cls_w(r, j)));
    }
    v.head.b_cls.push_back(bind_if(!pretrain_phase, params.cls_b[r]));
  }
  v.head.alpha_mix_raw = bind_if(!pretrain_phase, params.alpha_mix_raw);
  for (double& x : params.obj_w1) {
    v.head.obj_w1.push_back(bind_if(pretrain_phase, x));
  }
  for (double& x : params.obj_b1) {
    v.head.obj_b1.push_back(bind_if(pretrain_phase, x));
  }
  for (double& x : params.obj_w2) {
    v.head.obj_w2.push_back(bind_if(pretrain_phase, x));
  }
  v.head.obj_b2 = bind_if(pretrain_phase, params.obj_b2);
  v.head.tau = params.tau;
  v.head.theta_gamma = bind_if(!pretrain_phase, params.theta_gamma);
  v.head.theta_alpha = bind_if(!pretrain_phase, params.theta_alpha);
  v.head.theta_lambda = bind_if(!pretrain_phase, params.theta_lambda);
  v.head.b_obj = bind_if(!pretrain_phase, params.b_obj);
  v.active_ids = active_ids;
  for (int k = 0; k < 4; ++k) {
    std::vector<Var> row;
    row.reserve(params.cfg.d);
    for (std::size_t j = 0; j < params.cfg.d; ++j) {
      row.push_back(bind_if(pretrain_phase, params.box_w(k, j)));
    }
    v.box_w.push_back(std::move(row));
    v.box_b[k] = bind_if(pretrain_phase, params.box_b[k]);
  }
  for (double& x : params.bg_w) v.bg_w.push_back(bind_if(pretrain_phase, x));
  v.bg_b = bind_if(pretrain_phase, params.bg_b);
  return v;
}

double mean_loss(const DetectorParams& params, const std::vector<Scene>& scenes,
                 const std::vector<int>& active_ids, const LossWeights& weights,
                 bool mix_unknown) {
  if (scenes.empty()) throw std::invalid_argument("mean_loss: no scenes");
  const DetectorView<double> view = make_eval_view(params, active_ids);
  double total = 0.0;
  for (const Scene& scene : scenes) {
    const ForwardOutput<double> out = forward_scene(view, scene, mix_unknown);
    total += match_and_loss(out, scene.gt_objects, view, weights);
  }
  return total / static_cast<double>(scenes.size());
}

namespace {

// Class-agnostic detection loss: Hungarian matching on pure box-L1 cost,
// binary object-vs-background cross-entropy on both the background logit
// and the norm-based objectness logit, plus the weighted L1 term on matched
// boxes. Class logits stay untouched. The objectness term reads the query
// norm detached, so it calibrates the MLP to the norm distribution without
// pulling the feature stream away from the box and background objectives.
template <typename S>
S objectness_loss(const ForwardOutput<S>& out,
                  const std::vector<GtObject>& gts,
                  const heads::HeadParams<S>& head, double w_l1, double w_bg,
                  double w_obj) {
  const std::size_t n_query = out.boxes.size();
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  if (!gts.empty()) {
    if (gts.size() > n_query) {
      throw std::invalid_argument("pretrain_base: more objects than queries");
    }
    linalg::Matrix cost(gts.size(), n_query);
    for (std::size_t g = 0; g < gts.size(); ++g) {
      for (std::size_t qi = 0; qi < n_query; ++qi) {
        double l1 = 0.0;
        for (int k = 0; k < 4; ++k) {
          l1 += std::abs(value_of(out.boxes[qi][k]) - gts[g].box[k]);
        }
        cost(g, qi) = l1;
      }
    }
    matches = linalg::hungarian_assign(cost).pairs;
  }
  std::vector<char> is_object(n_query, 0);
  for (const auto& [g, qi] : matches) is_object[qi] = 1;

  // The background logit scores background high, the objectness logit
  // scores objects high; both are binary cross-entropies.
  std::vector<S> ce;
  ce.reserve(2 * n_query);
  for (std::size_t qi = 0; qi < n_query; ++qi) {
    const S& bg = out.bg_logits[qi];
    const S norm = constant_like(out.obj_norms[qi],
                                 value_of(out.obj_norms[qi]));
    const S z_obj = heads::objectness_logit<S>(norm, head);
    ce.push_back(w_bg * (is_object[qi] ? softplus(bg) : softplus(-bg)));
    ce.push_back(w_obj * (is_object[qi] ? softplus(-z_obj) : softplus(z_obj)));
  }
  S loss = sum(std::span<const S>(ce.data(), ce.size())) /
           static_cast<double>(n_query);
  if (!matches.empty()) {
    std::vector<S> l1_terms;
    l1_terms.reserve(matches.size() * 4);
    for (const auto& [g, qi] : matches) {
      for (int k = 0; k < 4; ++k) {
        l1_terms.push_back(abs(out.boxes[qi][k] - gts[g].box[k]));
      }
    }
    loss = loss + w_l1 *
                      sum(std::span<const S>(l1_terms.data(), l1_terms.size())) /
                      static_cast<double>(matches.size());
  }
  return loss;
}

}  // namespace

void pretrain_base(DetectorParams& params, const World& world,
                   const PretrainConfig& cfg) {
  if (cfg.epochs == 0 || cfg.scenes == 0 || cfg.lr == 0.0) return;
  if (world.config().d_feat != params.cfg.d_feat) {
    throw std::invalid_argument("pretrain_base: feature width mismatch");
  }

  // Pseudo classes with ids far outside any schedule.
  std::vector<int> pseudo;
  pseudo.reserve(cfg.pseudo_classes);
  for (std::size_t i = 0; i < cfg.pseudo_classes; ++i) {
    pseudo.push_back(1'000'001 + static_cast<int>(i));
  }
  std::vector<Scene> scenes;
  scenes.reserve(cfg.scenes);
  for (std::size_t s = 0; s < cfg.scenes; ++s) {
    scenes.push_back(world.generate_pretrain_scene((1ull << 62) | s, pseudo,
                                                   cfg.objects_per_scene,
                                                   cfg.distortions));
  }

  // Full-rank throwaway adapters stand in for direct base training; the
  // learned delta is folded into the base afterwards and the original
  // adapters are restored untouched.
  std::vector<adapters::AdapterState> saved;
  std::size_t layer_idx = 0;
  for (LoraLinear* layer : params.layers()) {
    saved.push_back(layer->adapter);
    const std::size_t d_out = layer->w0.rows();
    const std::size_t d_in = layer->w0.cols();
    adapters::AdapterState st =
        adapters::AdapterState::fresh(d_out, d_in, std::min(d_out, d_in));
    Rng rng = Rng(cfg.seed).stream("pretrain-lora", layer_idx);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (double& v : st.task.a.data()) v = scale * rng.gaussian();
    layer->adapter = std::move(st);
    ++layer_idx;
  }

  // Class rows and mixer scalars stay leaves: the loss never touches the
  // class logits. Routing, boxes, the background logit and the objectness
  // MLP move.
  const std::vector<int> probe_ids = {1};
  Tape tape;
  TrainRegistry registry;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t si = 0; si < scenes.size(); ++si) {
      tape.reset();
      registry.entries.clear();
      DetectorView<Var> view =
          make_train_view(params, probe_ids, tape, registry,
                          TrainMode::kFinetune, /*pretrain_phase=*/true);
      const ForwardOutput<Var> out = forward_scene(view, scenes[si], false);
      const Var loss = objectness_loss(out, scenes[si].gt_objects, view.head,
                                       cfg.w_l1, cfg.w_bg, cfg.w_obj);
      if (!std::isfinite(loss.value())) {
        throw std::runtime_error(
            "pretrain_base: non-finite loss at epoch " +
            std::to_string(epoch) + ", scene " + std::to_string(si));
      }
      tape.backward(loss);
      registry.sgd_step(tape, cfg.lr);
    }
  }

  layer_idx = 0;
  for (LoraLinear* layer : params.layers()) {
    const linalg::Matrix delta = layer->adapter.task.dense();
    for (std::size_t i = 0; i < layer->w0.rows(); ++i) {
      for (std::size_t j = 0; j < layer->w0.cols(); ++j) {
        layer->w0(i, j) += delta(i, j);
      }
    }
    layer->adapter = std::move(saved[layer_idx]);
    ++layer_idx;
  }
}

TrainStats train_task(DetectorParams& params, const std::vector<Scene>& scenes,
                      const TrainConfig& cfg) {
  if (scenes.empty()) throw std::invalid_argument("train_task: no scenes");
  if (cfg.active_ids.empty()) {
    throw std::invalid_argument("train_task: no supervised classes");
  }

  // A zero task delta is a stationary point of the factored update, so the
  // down-projection is re-seeded at every task start. Skipped for a zero
  // learning rate, which must leave everything untouched.
  if (cfg.mode != TrainMode::kFrozen && cfg.lr != 0.0) {
    std::size_t layer_idx = 0;
    for (LoraLinear* layer : params.layers()) {
      adapters::AdapterState& st = layer->adapter;
      if (st.rank() > 0 && all_zero(st.task.b) && all_zero(st.task.a)) {
        Rng rng = Rng(cfg.seed).stream(
            "lora-init",
            (static_cast<std::uint64_t>(st.task_index) << 8) | layer_idx);
        const double scale = 1.0 / std::sqrt(double(st.task.d_in()));
        for (double& v : st.task.a.data()) v = scale * rng.gaussian();
      }
      ++layer_idx;
    }
  }

  TrainStats stats;
  stats.initial_loss =
      mean_loss(params, scenes, cfg.active_ids, cfg.weights, cfg.mix_unknown);
  Tape tape;
  TrainRegistry registry;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t si = 0; si < scenes.size(); ++si) {
      tape.reset();
      registry.entries.clear();
      DetectorView<Var> view =
          make_train_view(params, cfg.active_ids, tape, registry, cfg.mode);
      const ForwardOutput<Var> out =
          forward_scene(view, scenes[si], cfg.mix_unknown);
      const Var loss =
          match_and_loss(out, scenes[si].gt_objects, view, cfg.weights);
      if (!std::isfinite(loss.value())) {
        throw std::runtime_error(
            "train_task: non-finite loss at epoch " + std::to_string(epoch) +
            ", scene " + std::to_string(si));
      }
      tape.backward(loss);
      registry.sgd_step(tape, cfg.lr);
      ++stats.steps;
    }
  }
  stats.final_loss =
      mean_loss(params, scenes, cfg.active_ids, cfg.weights, cfg.mix_unknown);
  return stats;
}

}  // namespace ewod::sim
