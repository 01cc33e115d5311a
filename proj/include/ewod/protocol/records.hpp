#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "ewod/protocol/schedule.hpp"

namespace ewod::protocol {

/// One ground-truth box or one detection, as stored in the JSON-lines
/// annotation/prediction files. score < 0 means "no score" (ground truth).
struct DetectionRecord {
  std::string image_id;
  std::string domain;
  std::array<double, 4> bbox{};  // x, y, w, h
  int category_id = 0;
  double score = -1.0;

  bool has_score() const { return score >= 0.0; }
};

/// Supervision filter for task t: keeps only records whose class is being
/// introduced in task t. Everything else (earlier classes, withheld
/// classes, strangers) is dropped, never relabeled.
std::vector<DetectionRecord> filter_annotations(
    const std::vector<DetectionRecord>& records, const TaskSchedule& schedule,
    std::uint32_t t);

/// Applies the cumulative-eval relabeling to ground truth: classes outside
/// the known set at t become the unknown sentinel.
std::vector<DetectionRecord> relabel_for_eval(
    const std::vector<DetectionRecord>& records, const EvalSet& eval);

std::string record_to_json_line(const DetectionRecord& r);
std::vector<DetectionRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path,
                   const std::vector<DetectionRecord>& records);

}  // namespace ewod::protocol
