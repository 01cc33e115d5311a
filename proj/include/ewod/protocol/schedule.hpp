#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ewod::protocol {

/// One training stage: a single domain introducing a disjoint class set.
struct TaskSpec {
  std::uint32_t index = 0;  // 1-based
  std::string domain;
  std::vector<int> classes;  // ids, introduction order
};

/// Full experiment schedule. Introduced classes carry ids 1..K in order of
/// introduction; the unknown sentinel is K+1; withheld classes (never
/// trained, always scored as unknown) continue from K+2.
struct TaskSchedule {
  std::vector<TaskSpec> tasks;
  std::vector<int> withheld;
  std::map<int, std::string> class_names;

  std::size_t num_tasks() const { return tasks.size(); }
  int num_introduced() const;
  int unknown_id() const { return num_introduced() + 1; }
};

/// Schedule construction input: classes referenced by name.
struct ScheduleConfig {
  struct Task {
    std::string domain;
    std::vector<std::string> class_names;
  };
  std::vector<Task> tasks;
  std::vector<std::string> withheld_names;
};

class ScheduleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Validates and assigns ids. Rejects empty schedules, duplicate classes
/// (within or across tasks), withheld names that overlap a task, duplicate
/// domains, and empty names.
TaskSchedule build_schedule(const ScheduleConfig& config);

/// Re-checks a deserialized schedule against the same invariants.
void validate_schedule(const TaskSchedule& schedule);

/// Class/domain composition of the cumulative evaluation at task t, plus
/// the relabeling target for ground truth outside the known set.
struct EvalSet {
  std::set<int> known_classes;  // K_1 ∪ ... ∪ K_t
  std::set<std::string> domains;
  int unknown_id = 0;

  /// Ground-truth class ids outside the known set score as unknown.
  int eval_class(int gt_class) const {
    return known_classes.count(gt_class) ? gt_class : unknown_id;
  }
};

EvalSet cumulative_eval_set(const TaskSchedule& schedule, std::uint32_t t);

std::string schedule_to_json(const TaskSchedule& schedule);
TaskSchedule schedule_from_json(const std::string& text);
void save_schedule(const std::filesystem::path& path,
                   const TaskSchedule& schedule);
TaskSchedule load_schedule(const std::filesystem::path& path);

}  // namespace ewod::protocol
