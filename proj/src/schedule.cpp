#include "ewod/protocol/schedule.hpp"

#include <fstream>
#include <unordered_map>

#include "json.hpp"

namespace ewod::protocol {

using nlohmann::json;

int TaskSchedule::num_introduced() const {
  int n = 0;
  for (const TaskSpec& t : tasks) n += static_cast<int>(t.classes.size());
  return n;
}

TaskSchedule build_schedule(const ScheduleConfig& config) {
  if (config.tasks.empty()) {
    throw ScheduleError("schedule: task list is empty");
  }
  TaskSchedule out;
  std::unordered_map<std::string, std::uint32_t> owner;  // name -> task index
  int next_id = 1;
  std::uint32_t index = 1;
  for (const ScheduleConfig::Task& task : config.tasks) {
    if (task.domain.empty()) {
      throw ScheduleError("schedule: task " + std::to_string(index) +
                          " has an empty domain tag");
    }
    if (task.class_names.empty()) {
      throw ScheduleError("schedule: task " + std::to_string(index) +
                          " introduces no classes");
    }
    for (const TaskSpec& prev : out.tasks) {
      if (prev.domain == task.domain) {
        throw ScheduleError("schedule: domain '" + task.domain +
                            "' appears in task " + std::to_string(prev.index) +
                            " and task " + std::to_string(index));
      }
    }
    TaskSpec spec;
    spec.index = index;
    spec.domain = task.domain;
    for (const std::string& name : task.class_names) {
      if (name.empty()) throw ScheduleError("schedule: empty class name");
      auto [it, inserted] = owner.emplace(name, index);
      if (!inserted) {
        throw ScheduleError("schedule: class '" + name + "' appears in task " +
                            std::to_string(it->second) + " and task " +
                            std::to_string(index));
      }
      spec.classes.push_back(next_id);
      out.class_names[next_id] = name;
      ++next_id;
    }
    out.tasks.push_back(std::move(spec));
    ++index;
  }
  out.class_names[next_id] = "unknown";
  int withheld_id = next_id + 1;
  for (const std::string& name : config.withheld_names) {
    if (name.empty()) throw ScheduleError("schedule: empty withheld name");
    auto it = owner.find(name);
    if (it != owner.end()) {
      throw ScheduleError("schedule: withheld class '" + name +
                          "' is also introduced in task " +
                          std::to_string(it->second));
    }
    if (!owner.emplace(name, 0).second) {
      throw ScheduleError("schedule: withheld class '" + name + "' repeated");
    }
    out.withheld.push_back(withheld_id);
    out.class_names[withheld_id] = name;
    ++withheld_id;
  }
  return out;
}

void validate_schedule(const TaskSchedule& schedule) {
  if (schedule.tasks.empty()) {
    throw ScheduleError("schedule: task list is empty");
  }
  std::set<int> seen;
  std::set<std::string> domains;
  std::uint32_t expect = 1;
  int next_id = 1;
  for (const TaskSpec& task : schedule.tasks) {
    if (task.index != expect) {
      throw ScheduleError("schedule: task indices must be 1..T in order");
    }
    if (!domains.insert(task.domain).second) {
      throw ScheduleError("schedule: duplicate domain '" + task.domain + "'");
    }
    if (task.classes.empty()) {
      throw ScheduleError("schedule: task " + std::to_string(task.index) +
                          " introduces no classes");
    }
    for (int c : task.classes) {
      if (c != next_id) {
        throw ScheduleError(
            "schedule: introduced class ids must be contiguous from 1");
      }
      if (!seen.insert(c).second) {
        throw ScheduleError("schedule: class id " + std::to_string(c) +
                            " appears twice");
      }
      ++next_id;
    }
    ++expect;
  }
  int withheld_expect = schedule.unknown_id() + 1;
  for (int w : schedule.withheld) {
    if (w != withheld_expect) {
      throw ScheduleError(
          "schedule: withheld ids must follow the unknown sentinel");
    }
    if (seen.count(w)) {
      throw ScheduleError("schedule: withheld id " + std::to_string(w) +
                          " collides with a task class");
    }
    ++withheld_expect;
  }
}

EvalSet cumulative_eval_set(const TaskSchedule& schedule, std::uint32_t t) {
  if (t < 1 || t > schedule.tasks.size()) {
    throw ScheduleError("cumulative_eval_set: task index out of range");
  }
  EvalSet eval;
  eval.unknown_id = schedule.unknown_id();
  for (std::uint32_t i = 0; i < t; ++i) {
    const TaskSpec& task = schedule.tasks[i];
    eval.known_classes.insert(task.classes.begin(), task.classes.end());
    eval.domains.insert(task.domain);
  }
  return eval;
}

std::string schedule_to_json(const TaskSchedule& schedule) {
  json j;
  j["tasks"] = json::array();
  for (const TaskSpec& task : schedule.tasks) {
    j["tasks"].push_back({{"index", task.index},
                          {"domain", task.domain},
                          {"classes", task.classes}});
  }
  j["withheld"] = schedule.withheld;
  json names = json::object();
  for (const auto& [id, name] : schedule.class_names) {
    names[std::to_string(id)] = name;
  }
  j["class_names"] = names;
  return j.dump(2) + "\n";
}

TaskSchedule schedule_from_json(const std::string& text) {
  const json j = json::parse(text);
  TaskSchedule out;
  for (const json& task : j.at("tasks")) {
    TaskSpec spec;
    spec.index = task.at("index").get<std::uint32_t>();
    spec.domain = task.at("domain").get<std::string>();
    spec.classes = task.at("classes").get<std::vector<int>>();
    out.tasks.push_back(std::move(spec));
  }
  out.withheld = j.at("withheld").get<std::vector<int>>();
  for (const auto& [key, value] : j.at("class_names").items()) {
    out.class_names[std::stoi(key)] = value.get<std::string>();
  }
  validate_schedule(out);
  return out;
}

void save_schedule(const std::filesystem::path& path,
                   const TaskSchedule& schedule) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << schedule_to_json(schedule);
}

TaskSchedule load_schedule(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return schedule_from_json(text);
}

}  // namespace ewod::protocol
