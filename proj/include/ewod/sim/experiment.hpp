#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ewod/protocol/records.hpp"
#include "ewod/protocol/schedule.hpp"
#include "ewod/sim/detector.hpp"
#include "ewod/sim/world.hpp"

// Experiment driver: sequential tasks with filtered supervision, adapter
// folding at task boundaries, and cumulative evaluation over every domain
// seen so far plus withheld unknowns.

namespace ewod::sim {

struct SimConfig {
  std::uint64_t seed = 0;
  DetectorConfig detector;  // k_total is filled in from the schedule
  std::size_t regions_per_scene = 12;
  std::size_t objects_per_scene = 3;
  double sigma_noise = 0.25;
  double sigma_background = 0.3;
  double prototype_scale = 4.0;
  std::size_t domain_rotations = 16;
  double domain_angle = 0.35;
  double domain_bias_sigma = 0.3;
  std::size_t scenes_per_task = 96;
  std::vector<std::size_t> task_scene_counts;  // optional per-task override
  std::size_t eval_scenes_per_domain = 16;
  std::size_t epochs = 60;
  double lr = 1e-2;
  // Class-agnostic base pretraining before the task sequence.
  std::size_t pretrain_scenes = 160;
  std::size_t pretrain_epochs = 60;
  double pretrain_lr = 1e-2;
  std::size_t pretrain_classes = 8;
  TrainMode mode = TrainMode::kDualLora;
  adapters::MergePolicy policy;
  LossWeights weights;
  std::size_t threads = 1;
  std::size_t top_k = 10;  // detections kept per image
};

/// Strict parse: unknown keys are rejected, missing keys take defaults.
SimConfig sim_config_from_json(const std::string& text);
std::string sim_config_to_json(const SimConfig& cfg);

/// World whose domains follow the schedule's task order and whose class
/// ids cover introduced and withheld classes.
World make_world(const protocol::TaskSchedule& schedule, const SimConfig& cfg);

/// Training scenes for task t (1-based): current-task classes only, so
/// earlier tasks' annotations can never leak in.
std::vector<Scene> train_scenes_for_task(const World& world,
                                         const protocol::TaskSchedule& schedule,
                                         const SimConfig& cfg, std::uint32_t t);

/// Inference over the cumulative eval set after task t. Eval scenes are a
/// pure function of (seed, domain, scene index), so round t+1 re-scores
/// the exact scenes of round t plus the new domain. Returns (predictions,
/// ground truth), with ground truth relabeled to the eval label space.
std::pair<std::vector<protocol::DetectionRecord>,
          std::vector<protocol::DetectionRecord>>
evaluate_round(const DetectorParams& params, const World& world,
               const protocol::TaskSchedule& schedule, const SimConfig& cfg,
               std::uint32_t t, bool mix_unknown = true);

struct TaskRunResult {
  std::uint32_t task_index = 0;
  std::vector<protocol::DetectionRecord> preds;
  std::vector<protocol::DetectionRecord> gts;
  std::uint64_t train_samples = 0;  // ground-truth objects seen this task
  TrainStats stats;
};

struct ExperimentResult {
  std::vector<TaskRunResult> tasks;
  DetectorParams params;
  std::size_t trainable_params = 0;
  std::size_t total_params = 0;
};

/// Full run: for each task, train on that task's scenes, fold the task
/// delta into the aggregate (dual-adapter mode only), then evaluate on the
/// cumulative set. Frozen bases are verified bit-identical afterwards.
ExperimentResult run_experiment(const protocol::TaskSchedule& schedule,
                                const SimConfig& cfg);

}  // namespace ewod::sim
