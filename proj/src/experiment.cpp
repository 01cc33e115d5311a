#include "ewod/sim/experiment.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "nlohmann/json.hpp"

namespace ewod::sim {

namespace {

constexpr std::uint64_t kEvalSeedBase = 1ull << 63;

adapters::MergePolicy policy_from_json(const nlohmann::json& j) {
  adapters::MergePolicy p;
  p.beta_min = j.value("beta_min", p.beta_min);
  p.beta_max = j.value("beta_max", p.beta_max);
  p.fixed = j.value("beta_fixed", p.fixed);
  p.fixed_beta = j.value("fixed_beta", p.fixed_beta);
  const std::string ratio = j.value("beta_ratio", std::string("prev"));
  if (ratio == "prev") {
    p.ratio = adapters::MergePolicy::Ratio::kPrev;
  } else if (ratio == "total") {
    p.ratio = adapters::MergePolicy::Ratio::kTotal;
  } else {
    throw std::invalid_argument("config: beta_ratio must be prev or total");
  }
  return p;
}

}  // namespace

SimConfig sim_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  static const std::vector<std::string> known = {
      "seed", "d", "d_feat", "num_queries", "rank", "obj_hidden",
      "box_gain", "attn_temp", "regions_per_scene", "objects_per_scene",
      "sigma_noise",
      "sigma_background", "prototype_scale", "domain_rotations",
      "domain_angle", "domain_bias_sigma", "scenes_per_task",
      "task_scene_counts", "eval_scenes_per_domain", "epochs", "lr",
      "pretrain_scenes", "pretrain_epochs", "pretrain_lr", "pretrain_classes",
      "mode", "beta_min", "beta_max", "beta_fixed", "fixed_beta", "beta_ratio",
      "w_cls", "w_l1", "threads", "top_k"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  SimConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.detector.d = j.value("d", cfg.detector.d);
  cfg.detector.d_feat = j.value("d_feat", cfg.detector.d_feat);
  cfg.detector.num_queries = j.value("num_queries", cfg.detector.num_queries);
  cfg.detector.rank = j.value("rank", cfg.detector.rank);
  cfg.detector.obj_hidden = j.value("obj_hidden", cfg.detector.obj_hidden);
  cfg.detector.box_gain = j.value("box_gain", cfg.detector.box_gain);
  cfg.detector.attn_temp = j.value("attn_temp", cfg.detector.attn_temp);
  cfg.regions_per_scene = j.value("regions_per_scene", cfg.regions_per_scene);
  cfg.objects_per_scene = j.value("objects_per_scene", cfg.objects_per_scene);
  cfg.sigma_noise = j.value("sigma_noise", cfg.sigma_noise);
  cfg.sigma_background = j.value("sigma_background", cfg.sigma_background);
  cfg.prototype_scale = j.value("prototype_scale", cfg.prototype_scale);
  cfg.domain_rotations = j.value("domain_rotations", cfg.domain_rotations);
  cfg.domain_angle = j.value("domain_angle", cfg.domain_angle);
  cfg.domain_bias_sigma = j.value("domain_bias_sigma", cfg.domain_bias_sigma);
  cfg.scenes_per_task = j.value("scenes_per_task", cfg.scenes_per_task);
  if (j.contains("task_scene_counts")) {
    cfg.task_scene_counts =
        j["task_scene_counts"].get<std::vector<std::size_t>>();
  }
  cfg.eval_scenes_per_domain =
      j.value("eval_scenes_per_domain", cfg.eval_scenes_per_domain);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.pretrain_scenes = j.value("pretrain_scenes", cfg.pretrain_scenes);
  cfg.pretrain_epochs = j.value("pretrain_epochs", cfg.pretrain_epochs);
  cfg.pretrain_lr = j.value("pretrain_lr", cfg.pretrain_lr);
  cfg.pretrain_classes = j.value("pretrain_classes", cfg.pretrain_classes);
  cfg.mode = mode_from_string(j.value("mode", to_string(cfg.mode)));
  cfg.policy = policy_from_json(j);
  cfg.weights.w_cls = j.value("w_cls", cfg.weights.w_cls);
  cfg.weights.w_l1 = j.value("w_l1", cfg.weights.w_l1);
  cfg.threads = j.value("threads", cfg.threads);
  if (cfg.threads == 0) cfg.threads = 1;
  cfg.top_k = j.value("top_k", cfg.top_k);
  return cfg;
}

std::string sim_config_to_json(const SimConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["d"] = cfg.detector.d;
  j["d_feat"] = cfg.detector.d_feat;
  j["num_queries"] = cfg.detector.num_queries;
  j["rank"] = cfg.detector.rank;
  j["obj_hidden"] = cfg.detector.obj_hidden;
  j["box_gain"] = cfg.detector.box_gain;
  j["attn_temp"] = cfg.detector.attn_temp;
  j["regions_per_scene"] = cfg.regions_per_scene;
  j["objects_per_scene"] = cfg.objects_per_scene;
  j["sigma_noise"] = cfg.sigma_noise;
  j["sigma_background"] = cfg.sigma_background;
  j["prototype_scale"] = cfg.prototype_scale;
  j["domain_rotations"] = cfg.domain_rotations;
  j["domain_angle"] = cfg.domain_angle;
  j["domain_bias_sigma"] = cfg.domain_bias_sigma;
  j["scenes_per_task"] = cfg.scenes_per_task;
  j["task_scene_counts"] = cfg.task_scene_counts;
  j["eval_scenes_per_domain"] = cfg.eval_scenes_per_domain;
  j["epochs"] = cfg.epochs;
  j["lr"] = cfg.lr;
  j["pretrain_scenes"] = cfg.pretrain_scenes;
  j["pretrain_epochs"] = cfg.pretrain_epochs;
  j["pretrain_lr"] = cfg.pretrain_lr;
  j["pretrain_classes"] = cfg.pretrain_classes;
  j["mode"] = to_string(cfg.mode);
  j["beta_min"] = cfg.policy.beta_min;
  j["beta_max"] = cfg.policy.beta_max;
  j["beta_fixed"] = cfg.policy.fixed;
  j["fixed_beta"] = cfg.policy.fixed_beta;
  j["beta_ratio"] =
      cfg.policy.ratio == adapters::MergePolicy::Ratio::kPrev ? "prev"
                                                              : "total";
  j["w_cls"] = cfg.weights.w_cls;
  j["w_l1"] = cfg.weights.w_l1;
  j["threads"] = cfg.threads;
  j["top_k"] = cfg.top_k;
  return j.dump(2) + "\n";
}

World make_world(const protocol::TaskSchedule& schedule, const SimConfig& cfg) {
  WorldConfig wc;
  wc.seed = cfg.seed;
  wc.d_feat = cfg.detector.d_feat;
  wc.regions_per_scene = cfg.regions_per_scene;
  wc.sigma_noise = cfg.sigma_noise;
  wc.sigma_background = cfg.sigma_background;
  wc.prototype_scale = cfg.prototype_scale;
  wc.domain_rotations = cfg.domain_rotations;
  wc.domain_angle = cfg.domain_angle;
  wc.domain_bias_sigma = cfg.domain_bias_sigma;
  for (const protocol::TaskSpec& task : schedule.tasks) {
    wc.domains.push_back(task.domain);
  }
  return World(std::move(wc));
}

namespace {

std::size_t scenes_for_task(const SimConfig& cfg, std::uint32_t t) {
  if (cfg.task_scene_counts.empty()) return cfg.scenes_per_task;
  if (cfg.task_scene_counts.size() < t) {
    throw std::invalid_argument("config: task_scene_counts shorter than schedule");
  }
  return cfg.task_scene_counts[t - 1];
}

std::vector<int> introduced_through(const protocol::TaskSchedule& schedule,
                                    std::uint32_t t) {
  std::vector<int> ids;
  for (std::uint32_t i = 0; i < t; ++i) {
    ids.insert(ids.end(), schedule.tasks[i].classes.begin(),
               schedule.tasks[i].classes.end());
  }
  return ids;
}

struct SceneEval {
  std::vector<protocol::DetectionRecord> preds;
  std::vector<protocol::DetectionRecord> gts;
};

SceneEval evaluate_scene(const DetectorView<double>& view, const Scene& scene,
                         const protocol::EvalSet& eval_set,
                         const SimConfig& cfg, bool mix_unknown) {
  SceneEval out;
  const ForwardOutput<double> fwd = forward_scene(view, scene, mix_unknown);
  const std::size_t n_known = view.active_ids.size();

  struct Candidate {
    double score;
    std::size_t query;
    std::size_t row;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(cfg.detector.num_queries);
  for (std::size_t qi = 0; qi < cfg.detector.num_queries; ++qi) {
    // One label per query: the best row of the per-query softmax over
    // final logits plus the background logit, the same normalization the
    // loss trains. Queries whose argmax is background emit nothing.
    std::vector<double> z(fwd.bundles[qi].z_final);
    z.push_back(fwd.bg_logits[qi]);
    const double m = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double& v : z) {
      v = std::exp(v - m);
      total += v;
    }
    std::size_t best = 0;
    for (std::size_t row = 1; row <= n_known; ++row) {
      if (z[row] > z[best]) best = row;
    }
    if (z[best] <= z[n_known + 1]) continue;  // background wins
    candidates.push_back({z[best] / total, qi, best});
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.query != b.query) return a.query < b.query;
              return a.row < b.row;
            });
  const std::size_t keep = std::min<std::size_t>(cfg.top_k, candidates.size());
  for (std::size_t i = 0; i < keep; ++i) {
    const Candidate& c = candidates[i];
    protocol::DetectionRecord r;
    r.image_id = scene.image_id;
    r.domain = scene.domain_tag;
    for (int k = 0; k < 4; ++k) r.bbox[k] = fwd.boxes[c.query][k];
    r.category_id = c.row < n_known ? view.active_ids[c.row]
                                    : eval_set.unknown_id;
    r.score = c.score;
    out.preds.push_back(std::move(r));
  }
  for (const GtObject& gt : scene.gt_objects) {
    protocol::DetectionRecord r;
    r.image_id = scene.image_id;
    r.domain = scene.domain_tag;
    r.bbox = gt.box;
    r.category_id = eval_set.eval_class(gt.class_id);
    out.gts.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<Scene> train_scenes_for_task(const World& world,
                                         const protocol::TaskSchedule& schedule,
                                         const SimConfig& cfg,
                                         std::uint32_t t) {
  if (t < 1 || t > schedule.tasks.size()) {
    throw std::invalid_argument("train_scenes_for_task: task out of range");
  }
  const protocol::TaskSpec& task = schedule.tasks[t - 1];
  const std::size_t n = scenes_for_task(cfg, t);
  std::vector<Scene> scenes;
  scenes.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::uint64_t seed = (static_cast<std::uint64_t>(t) << 32) | s;
    Scene scene = world.generate_scene(seed, task.domain, task.classes,
                                       cfg.objects_per_scene);
    scene.image_id = "t" + std::to_string(t) + "-s" + std::to_string(s);
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

std::pair<std::vector<protocol::DetectionRecord>,
          std::vector<protocol::DetectionRecord>>
evaluate_round(const DetectorParams& params, const World& world,
               const protocol::TaskSchedule& schedule, const SimConfig& cfg,
               std::uint32_t t, bool mix_unknown) {
  const protocol::EvalSet eval_set = protocol::cumulative_eval_set(schedule, t);
  const std::vector<int> active_ids = introduced_through(schedule, t);
  const DetectorView<double> view = make_eval_view(params, active_ids);

  // Eval scenes draw objects from the host task's classes plus every
  // withheld class, so unknowns appear in every round.
  std::vector<std::pair<std::uint32_t, std::size_t>> jobs;  // (domain, scene)
  for (std::uint32_t di = 0; di < t; ++di) {
    for (std::size_t si = 0; si < cfg.eval_scenes_per_domain; ++si) {
      jobs.emplace_back(di, si);
    }
  }
  std::vector<SceneEval> results(jobs.size());
  const auto run_job = [&](std::size_t j) {
    const auto [di, si] = jobs[j];
    const protocol::TaskSpec& host = schedule.tasks[di];
    std::vector<int> classes = host.classes;
    classes.insert(classes.end(), schedule.withheld.begin(),
                   schedule.withheld.end());
    const std::uint64_t seed =
        kEvalSeedBase | (static_cast<std::uint64_t>(di) << 32) | si;
    Scene scene = world.generate_scene(seed, host.domain, classes,
                                       cfg.objects_per_scene);
    scene.image_id = "d" + std::to_string(di) + "-e" + std::to_string(si);
    results[j] = evaluate_scene(view, scene, eval_set, cfg, mix_unknown);
  };

  if (cfg.threads <= 1 || jobs.size() <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run_job(j);
  } else {
    const std::size_t n_threads = std::min(cfg.threads, jobs.size());
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t w = 0; w < n_threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t j = w; j < jobs.size(); j += n_threads) run_job(j);
      });
    }
    for (std::thread& th : pool) th.join();
  }

  // Reduce in job order so the files do not depend on the thread count.
  std::pair<std::vector<protocol::DetectionRecord>,
            std::vector<protocol::DetectionRecord>>
      out;
  for (SceneEval& r : results) {
    std::move(r.preds.begin(), r.preds.end(), std::back_inserter(out.first));
    std::move(r.gts.begin(), r.gts.end(), std::back_inserter(out.second));
  }
  return out;
}

ExperimentResult run_experiment(const protocol::TaskSchedule& schedule,
                                const SimConfig& cfg) {
  protocol::validate_schedule(schedule);
  const World world = make_world(schedule, cfg);
  DetectorConfig dc = cfg.detector;
  dc.k_total = static_cast<std::size_t>(schedule.num_introduced());

  ExperimentResult result;
  result.params = init_detector(dc, cfg.seed);
  result.trainable_params = trainable_param_count(result.params, cfg.mode);
  result.total_params = total_param_count(result.params);

  PretrainConfig pc;
  pc.scenes = cfg.pretrain_scenes;
  pc.epochs = cfg.pretrain_epochs;
  pc.lr = cfg.pretrain_lr;
  pc.pseudo_classes = cfg.pretrain_classes;
  pc.objects_per_scene = cfg.objects_per_scene;
  pc.w_l1 = cfg.weights.w_l1;
  pc.seed = cfg.seed;
  pretrain_base(result.params, world, pc);

  // Snapshot the frozen bases to verify the freeze contract at the end.
  std::vector<linalg::Matrix> frozen;
  for (const LoraLinear* layer : result.params.layers()) {
    frozen.push_back(layer->w0);
  }

  for (std::uint32_t t = 1; t <= schedule.tasks.size(); ++t) {
    const std::vector<Scene> scenes =
        train_scenes_for_task(world, schedule, cfg, t);
    std::uint64_t samples = 0;
    for (const Scene& s : scenes) samples += s.gt_objects.size();

    TrainConfig tc;
    tc.lr = cfg.lr;
    tc.epochs = cfg.epochs;
    tc.mode = cfg.mode;
    tc.weights = cfg.weights;
    tc.seed = cfg.seed;
    tc.active_ids = schedule.tasks[t - 1].classes;
    TaskRunResult task_result;
    task_result.task_index = t;
    task_result.train_samples = samples;
    task_result.stats = train_task(result.params, scenes, tc);

    if (cfg.mode == TrainMode::kDualLora) {
      for (LoraLinear* layer : result.params.layers()) {
        layer->adapter = adapters::advance_task(layer->adapter, samples,
                                                cfg.policy);
      }
    }

    auto [preds, gts] = evaluate_round(result.params, world, schedule, cfg, t);
    task_result.preds = std::move(preds);
    task_result.gts = std::move(gts);
    result.tasks.push_back(std::move(task_result));
  }

  std::size_t li = 0;
  for (const LoraLinear* layer : result.params.layers()) {
    const auto got = layer->w0.data();
    const auto want = frozen[li++].data();
    if (!std::equal(got.begin(), got.end(), want.begin(), want.end())) {
      throw std::logic_error("run_experiment: frozen base weights changed");
    }
  }
  return result;
}

}  // namespace ewod::sim
