#include "ewod/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "json.hpp"

namespace ewod::metrics {

namespace {

// Deterministic detection order: score descending, then stable keys so the
// result is independent of input permutation.
bool detection_before(const DetectionRecord& a, const DetectionRecord& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.image_id != b.image_id) return a.image_id < b.image_id;
  if (a.category_id != b.category_id) return a.category_id < b.category_id;
  return a.bbox < b.bbox;
}

std::vector<const DetectionRecord*> sorted_preds(
    const std::vector<DetectionRecord>& preds, int class_id) {
  std::vector<const DetectionRecord*> out;
  for (const DetectionRecord& p : preds) {
    if (class_id == 0 || p.category_id == class_id) out.push_back(&p);
  }
  std::sort(out.begin(), out.end(),
            [](const DetectionRecord* a, const DetectionRecord* b) {
              return detection_before(*a, *b);
            });
  return out;
}

using GtIndex =
    std::unordered_map<std::string, std::vector<const DetectionRecord*>>;

GtIndex index_gts(const std::vector<DetectionRecord>& gts, int class_id) {
  GtIndex index;
  for (const DetectionRecord& g : gts) {
    if (class_id == 0 || g.category_id == class_id) {
      index[g.image_id].push_back(&g);
    }
  }
  return index;
}

// Greedy matcher: walks predictions in score order, claiming the best
// still-free ground-truth box of the same image above the IoU threshold.
// Returns one true/false per prediction, in the sorted order.
std::vector<bool> greedy_match(
    const std::vector<const DetectionRecord*>& preds, const GtIndex& gts,
    double iou_thr) {
  std::unordered_map<const DetectionRecord*, bool> taken;
  std::vector<bool> is_tp(preds.size(), false);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto it = gts.find(preds[i]->image_id);
    if (it == gts.end()) continue;
    const DetectionRecord* best = nullptr;
    double best_iou = iou_thr;
    for (const DetectionRecord* g : it->second) {
      if (taken[g]) continue;
      const double v = iou(preds[i]->bbox, g->bbox);
      if (v >= best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best) {
      taken[best] = true;
      is_tp[i] = true;
    }
  }
  return is_tp;
}

}  // namespace

double iou(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  const double area_a = a[2] * a[3];
  const double area_b = b[2] * b[3];
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  const double x1 = std::max(a[0], b[0]);
  const double y1 = std::max(a[1], b[1]);
  const double x2 = std::min(a[0] + a[2], b[0] + b[2]);
  const double y2 = std::min(a[1] + a[3], b[1] + b[3]);
  const double iw = x2 - x1;
  const double ih = y2 - y1;
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (area_a + area_b - inter);
}

std::optional<double> average_precision(
    const std::vector<DetectionRecord>& preds,
    const std::vector<DetectionRecord>& gts, int class_id, double iou_thr) {
  const GtIndex gt_index = index_gts(gts, class_id);
  std::size_t n_gt = 0;
  for (const auto& [_, v] : gt_index) n_gt += v.size();
  if (n_gt == 0) return std::nullopt;

  const auto ordered = sorted_preds(preds, class_id);
  const std::vector<bool> is_tp = greedy_match(ordered, gt_index, iou_thr);

  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (is_tp[i]) ++tp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
  }

  // All-point interpolation: integrate the running-max precision envelope
  // over recall.
  double ap = 0.0;
  double env = 0.0;
  for (std::size_t i = precision.size(); i-- > 0;) {
    env = std::max(env, precision[i]);
    const double prev_recall = i == 0 ? 0.0 : recall[i - 1];
    ap += (recall[i] - prev_recall) * env;
  }
  return 100.0 * ap;
}

double mean_ap(const std::vector<DetectionRecord>& preds,
               const std::vector<DetectionRecord>& gts,
               const std::set<int>& classes, double iou_thr) {
  double total = 0.0;
  std::size_t n = 0;
  for (int c : classes) {
    const std::optional<double> ap = average_precision(preds, gts, c, iou_thr);
    if (ap) {
      total += *ap;
      ++n;
    }
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

std::optional<double> u_recall(const std::vector<DetectionRecord>& preds,
                               const std::vector<DetectionRecord>& gts,
                               int unknown_id, double iou_thr) {
  const GtIndex gt_index = index_gts(gts, unknown_id);
  std::size_t n_gt = 0;
  for (const auto& [_, v] : gt_index) n_gt += v.size();
  if (n_gt == 0) return std::nullopt;
  const auto ordered = sorted_preds(preds, unknown_id);
  const std::vector<bool> is_tp = greedy_match(ordered, gt_index, iou_thr);
  const auto matched =
      static_cast<std::size_t>(std::count(is_tp.begin(), is_tp.end(), true));
  return 100.0 * static_cast<double>(matched) / static_cast<double>(n_gt);
}

WiResult wilderness_impact(const std::vector<DetectionRecord>& preds,
                           const std::vector<DetectionRecord>& gts,
                           int unknown_id, const MetricConfig& cfg) {
  // Known-class detections in score order; known and unknown gt separated.
  std::vector<const DetectionRecord*> known_preds;
  for (const DetectionRecord& p : preds) {
    if (p.category_id != unknown_id) known_preds.push_back(&p);
  }
  std::sort(known_preds.begin(), known_preds.end(),
            [](const DetectionRecord* a, const DetectionRecord* b) {
              return detection_before(*a, *b);
            });

  GtIndex known_gts;
  GtIndex unknown_gts;
  std::size_t total_known_gt = 0;
  for (const DetectionRecord& g : gts) {
    if (g.category_id == unknown_id) {
      unknown_gts[g.image_id].push_back(&g);
    } else {
      known_gts[g.image_id].push_back(&g);
      ++total_known_gt;
    }
  }

  WiResult out;
  if (known_preds.empty() || total_known_gt == 0) return out;

  // Classify each detection: correct (class-matched gt), on-unknown, or
  // plain false positive.
  enum class Kind { kTp, kOnUnknown, kFp };
  std::vector<Kind> kinds(known_preds.size(), Kind::kFp);
  std::unordered_map<const DetectionRecord*, bool> taken;
  for (std::size_t i = 0; i < known_preds.size(); ++i) {
    const DetectionRecord* p = known_preds[i];
    const DetectionRecord* best = nullptr;
    double best_iou = cfg.iou_thr;
    auto it = known_gts.find(p->image_id);
    if (it != known_gts.end()) {
      for (const DetectionRecord* g : it->second) {
        if (g->category_id != p->category_id || taken[g]) continue;
        const double v = iou(p->bbox, g->bbox);
        if (v >= best_iou) {
          best_iou = v;
          best = g;
        }
      }
    }
    if (best) {
      taken[best] = true;
      kinds[i] = Kind::kTp;
      continue;
    }
    auto uit = unknown_gts.find(p->image_id);
    if (uit != unknown_gts.end()) {
      for (const DetectionRecord* g : uit->second) {
        if (iou(p->bbox, g->bbox) >= cfg.iou_thr) {
          kinds[i] = Kind::kOnUnknown;
          break;
        }
      }
    }
  }

  // Truncate at the smallest prefix reaching the target known recall.
  std::size_t cut = known_preds.size();
  std::size_t tp_run = 0;
  for (std::size_t i = 0; i < known_preds.size(); ++i) {
    if (kinds[i] == Kind::kTp) ++tp_run;
    const double recall =
        static_cast<double>(tp_run) / static_cast<double>(total_known_gt);
    if (recall >= cfg.wi_recall_level) {
      cut = i + 1;
      break;
    }
  }
  if (cut == known_preds.size()) {
    const double final_recall =
        static_cast<double>(tp_run) / static_cast<double>(total_known_gt);
    if (final_recall < cfg.wi_recall_level) out.recall_unreachable = true;
  }

  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t on_unknown = 0;
  for (std::size_t i = 0; i < cut; ++i) {
    switch (kinds[i]) {
      case Kind::kTp: ++tp; break;
      case Kind::kOnUnknown: ++on_unknown; break;
      case Kind::kFp: ++fp; break;
    }
  }
  if (tp + fp == 0 || tp == 0) return out;
  const double p_closed = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double p_open =
      static_cast<double>(tp) / static_cast<double>(tp + fp + on_unknown);
  out.value = std::max(0.0, p_closed / p_open - 1.0);
  return out;
}

std::size_t a_ose(const std::vector<DetectionRecord>& preds,
                  const std::vector<DetectionRecord>& gts, int unknown_id,
                  const MetricConfig& cfg) {
  const GtIndex all_gts = index_gts(gts, 0);
  std::size_t count = 0;
  for (const DetectionRecord& p : preds) {
    if (p.category_id == unknown_id || p.score <= cfg.aose_score_thr) continue;
    auto it = all_gts.find(p.image_id);
    if (it == all_gts.end()) continue;
    const DetectionRecord* best = nullptr;
    double best_iou = cfg.iou_thr;
    for (const DetectionRecord* g : it->second) {
      const double v = iou(p.bbox, g->bbox);
      if (v >= best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best && best->category_id == unknown_id) ++count;
  }
  return count;
}

TaskEvalResult evaluate_task(const std::vector<DetectionRecord>& preds,
                             const std::vector<DetectionRecord>& gts,
                             const std::set<int>& prev_classes,
                             const std::set<int>& curr_classes,
                             int unknown_id, const MetricConfig& cfg) {
  TaskEvalResult r;
  std::set<int> all = prev_classes;
  all.insert(curr_classes.begin(), curr_classes.end());
  for (int c : all) {
    const std::optional<double> ap = average_precision(preds, gts, c, cfg.iou_thr);
    if (ap) r.per_class_ap[c] = *ap;
  }
  auto mean_over = [&](const std::set<int>& classes) {
    double total = 0.0;
    std::size_t n = 0;
    for (int c : classes) {
      auto it = r.per_class_ap.find(c);
      if (it != r.per_class_ap.end()) {
        total += it->second;
        ++n;
      }
    }
    return n == 0 ? 0.0 : total / static_cast<double>(n);
  };
  r.map_prev = mean_over(prev_classes);
  r.map_curr = mean_over(curr_classes);
  r.map_both = mean_over(all);
  r.u_recall = u_recall(preds, gts, unknown_id, cfg.iou_thr);
  const WiResult wi = wilderness_impact(preds, gts, unknown_id, cfg);
  r.wi = wi.value;
  r.wi_recall_unreachable = wi.recall_unreachable;
  r.a_ose = a_ose(preds, gts, unknown_id, cfg);
  for (const DetectionRecord& g : gts) {
    if (g.category_id == unknown_id) ++r.gt_unknown_count;
  }
  return r;
}

double fss(const std::vector<TaskEvalResult>& per_task,
           std::vector<std::string>* flags) {
  double total = 0.0;
  std::size_t terms = 0;
  for (std::size_t t = 2; t <= per_task.size(); ++t) {
    double denom = 0.0;
    for (std::size_t s = 0; s + 1 < t; ++s) denom += per_task[s].map_curr;
    denom /= static_cast<double>(t - 1);
    if (denom <= 0.0) {
      if (flags) {
        flags->push_back("fss: task " + std::to_string(t) +
                         " skipped (zero introduction mAP)");
      }
      continue;
    }
    const double ratio = 100.0 * per_task[t - 1].map_prev / denom;
    total += std::clamp(ratio, 0.0, 100.0);
    ++terms;
  }
  if (terms == 0) {
    if (flags) flags->push_back("fss: no retention terms");
    return 0.0;
  }
  return total / static_cast<double>(terms);
}

double oss(const std::vector<TaskEvalResult>& per_task,
           std::vector<std::string>* flags) {
  if (per_task.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t < per_task.size(); ++t) {
    const TaskEvalResult& r = per_task[t];
    double term;
    if (r.gt_unknown_count == 0) {
      term = 1.0;  // nothing unknown to find or confuse
      if (flags) {
        flags->push_back("oss: task " + std::to_string(t + 1) +
                         " has no unknown ground truth");
      }
    } else {
      const double u = r.u_recall.value_or(0.0) / 100.0;
      const double wi_term = 1.0 - r.wi;
      const double confusion = 1.0 / (1.0 + static_cast<double>(r.a_ose) /
                                                static_cast<double>(r.gt_unknown_count));
      term = (u + wi_term + confusion) / 3.0;
    }
    total += term;
  }
  return 100.0 * total / static_cast<double>(per_task.size());
}

double gss(const std::vector<TaskEvalResult>& per_task,
           std::vector<std::string>* flags) {
  if (per_task.size() < 2) {
    if (flags) flags->push_back("gss: fewer than two tasks");
    return 0.0;
  }
  double total = 0.0;
  for (std::size_t t = 1; t < per_task.size(); ++t) total += per_task[t].map_curr;
  return total / static_cast<double>(per_task.size() - 1);
}

double fogs(double fss_value, double oss_value, double gss_value) {
  return (fss_value + oss_value + gss_value) / 3.0;
}

FogsReport compute_fogs(const std::vector<TaskEvalResult>& per_task) {
  FogsReport report;
  report.per_task = per_task;
  report.fss = fss(per_task, &report.flags);
  report.oss = oss(per_task, &report.flags);
  report.gss = gss(per_task, &report.flags);
  report.fogs = fogs(report.fss, report.oss, report.gss);
  for (const TaskEvalResult& r : per_task) {
    if (r.wi_recall_unreachable) {
      report.flags.push_back("wi: recall level unreachable, full set used");
    }
  }
  return report;
}

std::string report_to_json(const FogsReport& report) {
  nlohmann::json j;
  j["fss"] = report.fss;
  j["oss"] = report.oss;
  j["gss"] = report.gss;
  j["fogs"] = report.fogs;
  j["flags"] = report.flags;
  j["per_task"] = nlohmann::json::array();
  for (const TaskEvalResult& r : report.per_task) {
    nlohmann::json t;
    nlohmann::json ap = nlohmann::json::object();
    for (const auto& [c, v] : r.per_class_ap) ap[std::to_string(c)] = v;
    t["per_class_ap"] = ap;
    t["map_prev"] = r.map_prev;
    t["map_curr"] = r.map_curr;
    t["map_both"] = r.map_both;
    if (r.u_recall) {
      t["u_recall"] = *r.u_recall;
    } else {
      t["u_recall"] = nullptr;
    }
    t["wi"] = r.wi;
    t["a_ose"] = r.a_ose;
    t["gt_unknown_count"] = r.gt_unknown_count;
    j["per_task"].push_back(t);
  }
  return j.dump(2) + "\n";
}

}  // namespace ewod::metrics
