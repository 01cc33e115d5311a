#include "ewod/protocol/records.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"

namespace ewod::protocol {

using nlohmann::json;

std::vector<DetectionRecord> filter_annotations(
    const std::vector<DetectionRecord>& records, const TaskSchedule& schedule,
    std::uint32_t t) {
  if (t < 1 || t > schedule.tasks.size()) {
    throw ScheduleError("filter_annotations: task index out of range");
  }
  const std::vector<int>& classes = schedule.tasks[t - 1].classes;
  const std::set<int> keep(classes.begin(), classes.end());
  std::vector<DetectionRecord> out;
  out.reserve(records.size());
  for (const DetectionRecord& r : records) {
    if (keep.count(r.category_id)) out.push_back(r);
  }
  return out;
}

std::vector<DetectionRecord> relabel_for_eval(
    const std::vector<DetectionRecord>& records, const EvalSet& eval) {
  std::vector<DetectionRecord> out = records;
  for (DetectionRecord& r : out) r.category_id = eval.eval_class(r.category_id);
  return out;
}

std::string record_to_json_line(const DetectionRecord& r) {
  json j;
  j["image_id"] = r.image_id;
  j["domain"] = r.domain;
  j["bbox"] = r.bbox;
  j["category_id"] = r.category_id;
  if (r.has_score()) j["score"] = r.score;
  return j.dump();
}

namespace {

DetectionRecord record_from_json(const json& j) {
  DetectionRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  r.domain = j.at("domain").get<std::string>();
  const auto box = j.at("bbox").get<std::vector<double>>();
  if (box.size() != 4) throw std::runtime_error("record: bbox must have 4 entries");
  std::copy(box.begin(), box.end(), r.bbox.begin());
  for (double v : r.bbox) {
    if (!std::isfinite(v)) throw std::runtime_error("record: non-finite bbox");
  }
  if (r.bbox[2] <= 0.0 || r.bbox[3] <= 0.0) {
    throw std::runtime_error("record: box width/height must be positive");
  }
  r.category_id = j.at("category_id").get<int>();
  if (j.contains("score")) r.score = j.at("score").get<double>();
  return r;
}

}  // namespace

std::vector<DetectionRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<DetectionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  return out;
}

void write_records(const std::filesystem::path& path,
                   const std::vector<DetectionRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  for (const DetectionRecord& r : records) {
    out << record_to_json_line(r) << "\n";
  }
}

}  // namespace ewod::protocol
