#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ewod/protocol/records.hpp"

namespace ewod::metrics {

using protocol::DetectionRecord;

struct MetricConfig {
  double iou_thr = 0.5;
  double wi_recall_level = 0.8;
  double aose_score_thr = 0.5;
};

/// Intersection over union of two (x, y, w, h) boxes; 0 for disjoint or
/// degenerate boxes.
double iou(const std::array<double, 4>& a, const std::array<double, 4>& b);

/// PASCAL-style average precision for one class, in percent. Greedy
/// per-image matching in descending score order with all-point
/// interpolation. Empty ground truth returns nullopt.
std::optional<double> average_precision(
    const std::vector<DetectionRecord>& preds,
    const std::vector<DetectionRecord>& gts, int class_id,
    double iou_thr = 0.5);

/// Mean AP in percent over the classes that have ground truth.
double mean_ap(const std::vector<DetectionRecord>& preds,
               const std::vector<DetectionRecord>& gts,
               const std::set<int>& classes, double iou_thr = 0.5);

/// Recall of unknown-labeled ground truth by unknown-labeled predictions,
/// percent. nullopt when there is no unknown ground truth.
std::optional<double> u_recall(const std::vector<DetectionRecord>& preds,
                               const std::vector<DetectionRecord>& gts,
                               int unknown_id, double iou_thr = 0.5);

struct WiResult {
  double value = 0.0;
  bool recall_unreachable = false;
};

/// Wilderness impact: precision drop of known-class detections when
/// detections landing on unknown ground truth count as errors, evaluated
/// at the score cutoff reaching the given known-class recall.
WiResult wilderness_impact(const std::vector<DetectionRecord>& preds,
                           const std::vector<DetectionRecord>& gts,
                           int unknown_id, const MetricConfig& cfg = {});

/// Count of confident known-class detections whose best-overlap ground
/// truth is unknown (open-set misclassifications).
std::size_t a_ose(const std::vector<DetectionRecord>& preds,
                  const std::vector<DetectionRecord>& gts, int unknown_id,
                  const MetricConfig& cfg = {});

/// Per-task evaluation summary feeding the aggregate scores.
struct TaskEvalResult {
  std::map<int, double> per_class_ap;  // percent, classes with gt only
  double map_prev = 0.0;   // previously introduced classes, percent
  double map_curr = 0.0;   // classes introduced this task, percent
  double map_both = 0.0;   // all known classes, percent
  std::optional<double> u_recall;  // percent
  double wi = 0.0;
  bool wi_recall_unreachable = false;
  std::size_t a_ose = 0;
  std::size_t gt_unknown_count = 0;
};

/// Scores one cumulative evaluation round.
TaskEvalResult evaluate_task(const std::vector<DetectionRecord>& preds,
                             const std::vector<DetectionRecord>& gts,
                             const std::set<int>& prev_classes,
                             const std::set<int>& curr_classes,
                             int unknown_id, const MetricConfig& cfg = {});

struct FogsReport {
  double fss = 0.0;
  double oss = 0.0;
  double gss = 0.0;
  double fogs = 0.0;
  std::vector<TaskEvalResult> per_task;
  std::vector<std::string> flags;
};

/// Retention score: mean over tasks t >= 2 of the ratio between the mAP of
/// previously introduced classes at t and the mean of those classes'
/// introduction-time mAPs, clamped to [0, 100].
double fss(const std::vector<TaskEvalResult>& per_task,
           std::vector<std::string>* flags = nullptr);

/// Open-set score: per-task mean of U-Recall/100, 1-WI, and
/// 1/(1 + A-OSE/GT_unk), averaged over tasks, in percent.
double oss(const std::vector<TaskEvalResult>& per_task,
           std::vector<std::string>* flags = nullptr);

/// Cross-domain adaptation score: mean of current-task mAP over t >= 2.
double gss(const std::vector<TaskEvalResult>& per_task,
           std::vector<std::string>* flags = nullptr);

double fogs(double fss_value, double oss_value, double gss_value);

FogsReport compute_fogs(const std::vector<TaskEvalResult>& per_task);

std::string report_to_json(const FogsReport& report);

}  // namespace ewod::metrics
