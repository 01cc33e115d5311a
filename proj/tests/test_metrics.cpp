#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <random>

#include "doctest.h"
#include "ewod/metrics/metrics.hpp"
#include "nlohmann/json.hpp"

using ewod::metrics::a_ose;
using ewod::metrics::average_precision;
using ewod::metrics::compute_fogs;
using ewod::metrics::evaluate_task;
using ewod::metrics::iou;
using ewod::metrics::mean_ap;
using ewod::metrics::MetricConfig;
using ewod::metrics::TaskEvalResult;
using ewod::metrics::u_recall;
using ewod::metrics::wilderness_impact;
using ewod::protocol::DetectionRecord;

namespace {

DetectionRecord det(std::string image, int cls, std::array<double, 4> box,
                    double score = -1.0) {
  DetectionRecord r;
  r.image_id = std::move(image);
  r.domain = "d";
  r.bbox = box;
  r.category_id = cls;
  r.score = score;
  return r;
}

// Independent AP oracle: fresh greedy matcher plus a quadratic scan for the
// interpolated precision envelope.
double ap_oracle(std::vector<DetectionRecord> preds,
                 const std::vector<DetectionRecord>& gts, int cls,
                 double thr) {
  std::size_t n_gt = 0;
  for (const auto& g : gts) n_gt += g.category_id == cls ? 1 : 0;
  REQUIRE(n_gt > 0);
  std::erase_if(preds, [&](const DetectionRecord& p) {
    return p.category_id != cls;
  });
  std::sort(preds.begin(), preds.end(),
            [](const DetectionRecord& a, const DetectionRecord& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.image_id != b.image_id) return a.image_id < b.image_id;
              return a.bbox < b.bbox;
            });
  std::vector<bool> used(gts.size(), false);
  std::vector<bool> tp(preds.size(), false);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double best = thr;
    std::size_t best_j = gts.size();
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (used[j] || gts[j].category_id != cls ||
          gts[j].image_id != preds[i].image_id) {
        continue;
      }
      const double v = iou(preds[i].bbox, gts[j].bbox);
      if (v >= best && (best_j == gts.size() || v > best)) {
        best = v;
        best_j = j;
      }
    }
    if (best_j < gts.size()) {
      used[best_j] = true;
      tp[i] = true;
    }
  }
  std::vector<double> precision(preds.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    hits += tp[i] ? 1 : 0;
    precision[i] = static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  double ap = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!tp[i]) continue;
    double env = 0.0;
    for (std::size_t j = i; j < preds.size(); ++j) {
      env = std::max(env, precision[j]);
    }
    ap += env / static_cast<double>(n_gt);
  }
  return 100.0 * ap;
}

}  // namespace

TEST_CASE("iou hand values") {
  const std::array<double, 4> unit = {0.0, 0.0, 2.0, 2.0};
  CHECK(iou(unit, unit) == doctest::Approx(1.0));
  CHECK(iou(unit, {1.0, 0.0, 2.0, 2.0}) == doctest::Approx(1.0 / 3.0));
  CHECK(iou(unit, {5.0, 5.0, 1.0, 1.0}) == 0.0);
  CHECK(iou(unit, {2.0, 0.0, 2.0, 2.0}) == 0.0);  // touching edges
  CHECK(iou(unit, {0.0, 0.0, 0.0, 2.0}) == 0.0);  // degenerate
  CHECK(iou({0.0, 0.0, 1.0, 1.0}, {0.25, 0.25, 0.5, 0.5}) ==
        doctest::Approx(0.25));
}

TEST_CASE("average precision hand cases") {
  const std::array<double, 4> box = {0.1, 0.1, 0.2, 0.2};
  const std::array<double, 4> off = {0.7, 0.7, 0.1, 0.1};
  const std::vector<DetectionRecord> gt = {det("a", 1, box)};

  CHECK(*average_precision({det("a", 1, box, 0.9)}, gt, 1) ==
        doctest::Approx(100.0));
  // A lower-scored false positive after the hit does not hurt.
  CHECK(*average_precision({det("a", 1, box, 0.9), det("a", 1, off, 0.8)},
                           gt, 1) == doctest::Approx(100.0));
  // The same false positive ranked first halves the score.
  CHECK(*average_precision({det("a", 1, off, 0.9), det("a", 1, box, 0.8)},
                           gt, 1) == doctest::Approx(50.0));
  // A duplicate on an already-claimed object is a false positive.
  CHECK(*average_precision({det("a", 1, box, 0.9), det("a", 1, box, 0.8)},
                           gt, 1) == doctest::Approx(100.0));

  const std::vector<DetectionRecord> gt2 = {det("a", 1, box),
                                            det("b", 1, box)};
  CHECK(*average_precision({det("a", 1, box, 0.9)}, gt2, 1) ==
        doctest::Approx(50.0));
  CHECK(*average_precision({det("a", 1, box, 0.9), det("b", 1, box, 0.8)},
                           gt2, 1) == doctest::Approx(100.0));
  // Matching never crosses images.
  CHECK(*average_precision({det("c", 1, box, 0.9)}, gt2, 1) ==
        doctest::Approx(0.0));

  CHECK_FALSE(average_precision({det("a", 2, box, 0.9)}, gt, 2).has_value());
  CHECK(*average_precision({}, gt, 1) == doctest::Approx(0.0));
}

TEST_CASE("average precision matches a quadratic oracle on random scenes") {
  std::mt19937 rng(20240817);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> gt_count(1, 6);
  std::uniform_int_distribution<int> pred_count(0, 10);
  std::uniform_int_distribution<int> image(0, 2);
  std::uniform_int_distribution<int> score_tick(1, 10);

  for (int trial = 0; trial < 200; ++trial) {
    std::vector<DetectionRecord> gts;
    const int n_gt = gt_count(rng);
    for (int i = 0; i < n_gt; ++i) {
      gts.push_back(det("img" + std::to_string(image(rng)), 1,
                        {unit(rng), unit(rng), 0.1 + 0.2 * unit(rng),
                         0.1 + 0.2 * unit(rng)}));
    }
    std::vector<DetectionRecord> preds;
    const int n_pred = pred_count(rng);
    for (int i = 0; i < n_pred; ++i) {
      std::array<double, 4> box;
      if (unit(rng) < 0.6) {
        const auto& base = gts[static_cast<std::size_t>(
            std::uniform_int_distribution<int>(0, n_gt - 1)(rng))].bbox;
        box = {base[0] + 0.05 * unit(rng), base[1] + 0.05 * unit(rng),
               base[2], base[3]};
        preds.push_back(det(gts[0].image_id, 1, box, 0.0));
        preds.back().image_id =
            unit(rng) < 0.9 ? gts.back().image_id : "imgX";
      } else {
        box = {unit(rng), unit(rng), 0.05, 0.05};
        preds.push_back(det("img" + std::to_string(image(rng)), 1, box, 0.0));
      }
      // Quantized scores so ties are exercised.
      preds.back().score = 0.1 * score_tick(rng);
    }
    const double got = average_precision(preds, gts, 1).value();
    const double want = ap_oracle(preds, gts, 1, 0.5);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("ap is invariant to record order and monotone in added hits") {
  std::mt19937 rng(7);
  const std::array<double, 4> box = {0.1, 0.1, 0.2, 0.2};
  std::vector<DetectionRecord> gts = {det("a", 1, box), det("b", 1, box),
                                      det("c", 1, box)};
  std::vector<DetectionRecord> preds = {
      det("a", 1, box, 0.9), det("b", 1, {0.5, 0.5, 0.1, 0.1}, 0.8),
      det("b", 1, box, 0.7), det("c", 1, {0.8, 0.1, 0.1, 0.1}, 0.7)};
  const double base = average_precision(preds, gts, 1).value();
  for (int i = 0; i < 20; ++i) {
    std::shuffle(preds.begin(), preds.end(), rng);
    std::shuffle(gts.begin(), gts.end(), rng);
    CHECK(average_precision(preds, gts, 1).value() == doctest::Approx(base));
  }
  preds.push_back(det("c", 1, box, 0.95));
  CHECK(average_precision(preds, gts, 1).value() >= base - 1e-12);
}

TEST_CASE("unknown recall counts unknown-labeled hits only") {
  const std::array<double, 4> box = {0.1, 0.1, 0.2, 0.2};
  const std::array<double, 4> box2 = {0.6, 0.6, 0.2, 0.2};
  const int unk = 7;
  const std::vector<DetectionRecord> gts = {det("a", unk, box),
                                            det("a", unk, box2),
                                            det("a", 1, {0.4, 0.1, 0.1, 0.1})};

  CHECK(*u_recall({det("a", unk, box, 0.9)}, gts, unk) ==
        doctest::Approx(50.0));
  CHECK(*u_recall({det("a", unk, box, 0.9), det("a", unk, box2, 0.2)}, gts,
                  unk) == doctest::Approx(100.0));
  // Known-labeled overlap does not count as finding the unknown.
  CHECK(*u_recall({det("a", 1, box, 0.9)}, gts, unk) == doctest::Approx(0.0));
  // Two detections on the same unknown count once.
  CHECK(*u_recall({det("a", unk, box, 0.9), det("a", unk, box, 0.8)}, gts,
                  unk) == doctest::Approx(50.0));
  CHECK_FALSE(u_recall({}, {det("a", 1, box)}, unk).has_value());
}

TEST_CASE("wilderness impact hand case reaches one quarter") {
  const int unk = 7;
  std::vector<DetectionRecord> gts;
  std::vector<DetectionRecord> preds;
  for (int i = 0; i < 8; ++i) {
    const std::array<double, 4> box = {0.1 * i, 0.0, 0.08, 0.08};
    gts.push_back(det("a", 1, box));
    preds.push_back(det("a", 1, box, 0.9 - 0.01 * i));
  }
  gts.push_back(det("a", unk, {0.0, 0.5, 0.1, 0.1}));
  gts.push_back(det("a", unk, {0.3, 0.5, 0.1, 0.1}));
  preds.push_back(det("a", 1, {0.0, 0.5, 0.1, 0.1}, 0.95));
  preds.push_back(det("a", 1, {0.3, 0.5, 0.1, 0.1}, 0.94));

  MetricConfig cfg;
  cfg.wi_recall_level = 1.0;
  const auto full = wilderness_impact(preds, gts, unk, cfg);
  CHECK(full.value == doctest::Approx(0.25));
  CHECK_FALSE(full.recall_unreachable);

  // At the default level the cutoff lands after the seventh hit: seven
  // hits against nine kept detections.
  const auto cut = wilderness_impact(preds, gts, unk, {});
  CHECK(cut.value == doctest::Approx(9.0 / 7.0 - 1.0));

  // Without unknown ground truth there is nothing to confuse.
  std::vector<DetectionRecord> known_only(gts.begin(), gts.begin() + 8);
  CHECK(wilderness_impact(preds, known_only, unk, cfg).value ==
        doctest::Approx(0.0));

  // Unreachable recall level falls back to the full list and says so.
  const std::vector<DetectionRecord> sparse = {preds[0], preds[8]};
  const auto flagged = wilderness_impact(sparse, gts, unk, cfg);
  CHECK(flagged.recall_unreachable);
  CHECK(flagged.value == doctest::Approx(1.0));  // 1 hit, 1 on unknown
}

TEST_CASE("open-set error count uses best overlap and a strict cutoff") {
  const int unk = 7;
  const std::array<double, 4> ubox = {0.1, 0.1, 0.2, 0.2};
  const std::array<double, 4> kbox = {0.6, 0.6, 0.2, 0.2};
  const std::vector<DetectionRecord> gts = {det("a", unk, ubox),
                                            det("a", 1, kbox)};

  CHECK(a_ose({det("a", 1, ubox, 0.9)}, gts, unk) == 1);
  CHECK(a_ose({det("a", 1, ubox, 0.9), det("a", 2, ubox, 0.8)}, gts, unk) ==
        2);
  // Unknown-labeled detections are not misclassifications.
  CHECK(a_ose({det("a", unk, ubox, 0.9)}, gts, unk) == 0);
  // At or below the confidence cutoff nothing counts.
  CHECK(a_ose({det("a", 1, ubox, 0.5)}, gts, unk) == 0);
  CHECK(a_ose({det("a", 1, ubox, 0.51)}, gts, unk) == 1);
  // Best overlap with a known object wins even with some unknown overlap.
  const std::array<double, 4> nearer = {0.58, 0.58, 0.2, 0.2};
  CHECK(a_ose({det("a", 1, nearer, 0.9)}, gts, unk) == 0);
  // No overlap at all is a plain false positive, not an open-set error.
  CHECK(a_ose({det("a", 1, {0.9, 0.9, 0.05, 0.05}, 0.9)}, gts, unk) == 0);
}

TEST_CASE("evaluate_task partitions classes and counts unknowns") {
  const int unk = 9;
  const std::array<double, 4> b1 = {0.0, 0.0, 0.2, 0.2};
  const std::array<double, 4> b2 = {0.4, 0.4, 0.2, 0.2};
  const std::array<double, 4> b3 = {0.7, 0.0, 0.2, 0.2};
  const std::vector<DetectionRecord> gts = {det("a", 1, b1), det("a", 2, b2),
                                            det("a", unk, b3)};
  const std::vector<DetectionRecord> preds = {
      det("a", 1, b1, 0.9), det("a", 2, {0.0, 0.6, 0.1, 0.1}, 0.8),
      det("a", unk, b3, 0.7)};

  const TaskEvalResult r = evaluate_task(preds, gts, {1}, {2}, unk, {});
  CHECK(r.per_class_ap.at(1) == doctest::Approx(100.0));
  CHECK(r.per_class_ap.at(2) == doctest::Approx(0.0));
  CHECK(r.map_prev == doctest::Approx(100.0));
  CHECK(r.map_curr == doctest::Approx(0.0));
  CHECK(r.map_both == doctest::Approx(50.0));
  CHECK(r.u_recall.value() == doctest::Approx(100.0));
  CHECK(r.a_ose == 0);
  CHECK(r.gt_unknown_count == 1);
}

TEST_CASE("retention score reproduces the reference table ratios") {
  // Two-task sequence: introduction mAP 76.05, retained mAP 73.15.
  std::vector<TaskEvalResult> seq(2);
  seq[0].map_curr = 76.05;
  seq[1].map_prev = 73.15;
  CHECK(std::abs(ewod::metrics::fss(seq) - 96.19) < 0.01);

  seq[0].map_curr = 61.64;
  seq[1].map_prev = 39.98;
  CHECK(std::abs(ewod::metrics::fss(seq) - 64.86) < 0.01);

  // Perfect retention.
  seq[0].map_curr = 42.0;
  seq[1].map_prev = 42.0;
  CHECK(ewod::metrics::fss(seq) == doctest::Approx(100.0));

  // Backward transfer is clamped, never rewarded above 100.
  seq[1].map_prev = 55.0;
  CHECK(ewod::metrics::fss(seq) == doctest::Approx(100.0));

  // Three tasks average the per-task ratios.
  std::vector<TaskEvalResult> three(3);
  three[0].map_curr = 50.0;
  three[1].map_curr = 30.0;
  three[1].map_prev = 40.0;
  three[2].map_prev = 20.0;  // denominator mean(50, 30) = 40
  CHECK(ewod::metrics::fss(three) == doctest::Approx((80.0 + 50.0) / 2.0));

  // A zero introduction mAP cannot anchor a ratio.
  std::vector<std::string> flags;
  std::vector<TaskEvalResult> degen(2);
  degen[0].map_curr = 0.0;
  degen[1].map_prev = 10.0;
  CHECK(ewod::metrics::fss(degen, &flags) == doctest::Approx(0.0));
  CHECK(flags.size() == 2);  // skipped term, then no terms at all
}

TEST_CASE("open-set score blends recall, wilderness and confusion") {
  TaskEvalResult perfect;
  perfect.u_recall = 100.0;
  perfect.wi = 0.0;
  perfect.a_ose = 0;
  perfect.gt_unknown_count = 5;
  CHECK(ewod::metrics::oss({perfect}) == doctest::Approx(100.0));

  TaskEvalResult half;
  half.u_recall = 50.0;
  half.wi = 0.25;
  half.a_ose = 4;
  half.gt_unknown_count = 4;
  CHECK(std::abs(ewod::metrics::oss({half}) - 58.33) < 0.01);
  CHECK(std::abs(ewod::metrics::oss({perfect, half}) - 79.17) < 0.01);

  // No unknown ground truth: the task contributes a vacuous full score
  // and the report says so.
  TaskEvalResult vacuous;
  vacuous.gt_unknown_count = 0;
  std::vector<std::string> flags;
  CHECK(ewod::metrics::oss({vacuous}, &flags) == doctest::Approx(100.0));
  REQUIRE(flags.size() == 1);
  CHECK(flags[0].find("no unknown ground truth") != std::string::npos);
}

TEST_CASE("adaptation score averages post-first-task introduction mAP") {
  std::vector<TaskEvalResult> two(2);
  two[1].map_curr = 8.42;
  CHECK(ewod::metrics::gss(two) == doctest::Approx(8.42));

  std::vector<TaskEvalResult> three(3);
  three[1].map_curr = 10.0;
  three[2].map_curr = 20.0;
  CHECK(ewod::metrics::gss(three) == doctest::Approx(15.0));

  std::vector<std::string> flags;
  CHECK(ewod::metrics::gss({TaskEvalResult{}}, &flags) == 0.0);
  CHECK(flags.size() == 1);
}

TEST_CASE("combined score reproduces the reference aggregates") {
  CHECK(std::abs(ewod::metrics::fogs(96.19, 78.62, 8.42) - 61.08) < 0.005);
  CHECK(std::abs(ewod::metrics::fogs(64.86, 61.67, 7.92) - 44.82) < 0.005);
  CHECK(ewod::metrics::fogs(100.0, 100.0, 100.0) == doctest::Approx(100.0));
}

TEST_CASE("full report is consistent and serializes to json") {
  std::vector<TaskEvalResult> seq(2);
  seq[0].map_curr = 76.05;
  seq[0].u_recall = 31.1;
  seq[0].wi = 0.05;
  seq[0].a_ose = 12;
  seq[0].gt_unknown_count = 40;
  seq[1].map_prev = 73.15;
  seq[1].map_curr = 8.42;
  seq[1].u_recall = 28.0;
  seq[1].wi = 0.08;
  seq[1].a_ose = 15;
  seq[1].gt_unknown_count = 40;

  const auto report = compute_fogs(seq);
  CHECK(report.fogs ==
        doctest::Approx((report.fss + report.oss + report.gss) / 3.0));
  CHECK(std::abs(report.fss - 96.19) < 0.01);
  CHECK(report.gss == doctest::Approx(8.42));

  const auto j = nlohmann::json::parse(ewod::metrics::report_to_json(report));
  CHECK(j["fss"].get<double>() == doctest::Approx(report.fss));
  CHECK(j["fogs"].get<double>() == doctest::Approx(report.fogs));
  CHECK(j["per_task"].size() == 2);
  CHECK(j["per_task"][0]["map_curr"].get<double>() == doctest::Approx(76.05));
}
