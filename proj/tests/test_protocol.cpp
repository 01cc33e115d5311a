#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>

#include "doctest.h"
#include "ewod/protocol/records.hpp"
#include "ewod/protocol/schedule.hpp"

using ewod::protocol::build_schedule;
using ewod::protocol::cumulative_eval_set;
using ewod::protocol::DetectionRecord;
using ewod::protocol::EvalSet;
using ewod::protocol::filter_annotations;
using ewod::protocol::ScheduleConfig;
using ewod::protocol::ScheduleError;
using ewod::protocol::TaskSchedule;

namespace {

ScheduleConfig weather_config() {
  ScheduleConfig cfg;
  cfg.tasks = {{"daytime_sunny", {"bike", "bus"}},
               {"night_sunny", {"car", "motor"}},
               {"night_rainy", {"person", "rider"}}};
  cfg.withheld_names = {"truck"};
  return cfg;
}

DetectionRecord make_record(std::string image, int cls, double score = -1.0) {
  DetectionRecord r;
  r.image_id = std::move(image);
  r.domain = "d";
  r.bbox = {0.1, 0.1, 0.2, 0.2};
  r.category_id = cls;
  r.score = score;
  return r;
}

}  // namespace

TEST_CASE("build_schedule assigns ids in introduction order") {
  const TaskSchedule s = build_schedule(weather_config());
  REQUIRE(s.tasks.size() == 3);
  CHECK(s.tasks[0].classes == std::vector<int>{1, 2});
  CHECK(s.tasks[1].classes == std::vector<int>{3, 4});
  CHECK(s.tasks[2].classes == std::vector<int>{5, 6});
  CHECK(s.num_introduced() == 6);
  CHECK(s.unknown_id() == 7);
  REQUIRE(s.withheld.size() == 1);
  CHECK(s.withheld[0] == 8);
  CHECK(s.class_names.at(1) == "bike");
  CHECK(s.class_names.at(7) == "unknown");
  CHECK(s.class_names.at(8) == "truck");

  const EvalSet eval3 = cumulative_eval_set(s, 3);
  CHECK(eval3.known_classes.size() == 6);
  CHECK(eval3.domains.size() == 3);
}

TEST_CASE("build_schedule rejects invalid configurations") {
  ScheduleConfig overlap = weather_config();
  overlap.tasks[2].class_names = {"bike", "rider"};
  CHECK_THROWS_WITH_AS(build_schedule(overlap),
                       doctest::Contains("task 1"), ScheduleError);

  ScheduleConfig withheld_known = weather_config();
  withheld_known.withheld_names = {"car"};
  CHECK_THROWS_WITH_AS(build_schedule(withheld_known),
                       doctest::Contains("withheld"), ScheduleError);

  ScheduleConfig empty;
  CHECK_THROWS_AS(build_schedule(empty), ScheduleError);

  ScheduleConfig dup_domain = weather_config();
  dup_domain.tasks[1].domain = "daytime_sunny";
  CHECK_THROWS_AS(build_schedule(dup_domain), ScheduleError);

  ScheduleConfig no_classes = weather_config();
  no_classes.tasks[0].class_names.clear();
  CHECK_THROWS_AS(build_schedule(no_classes), ScheduleError);
}

TEST_CASE("cumulative_eval_set grows by one task at a time") {
  const TaskSchedule s = build_schedule(weather_config());
  const EvalSet e1 = cumulative_eval_set(s, 1);
  CHECK(e1.known_classes == std::set<int>{1, 2});
  CHECK(e1.domains == std::set<std::string>{"daytime_sunny"});
  CHECK(e1.unknown_id == 7);

  for (std::uint32_t t = 2; t <= 3; ++t) {
    const EvalSet prev = cumulative_eval_set(s, t - 1);
    const EvalSet curr = cumulative_eval_set(s, t);
    CHECK(curr.known_classes.size() ==
          prev.known_classes.size() + s.tasks[t - 1].classes.size());
    CHECK(curr.domains.size() == prev.domains.size() + 1);
    for (int c : prev.known_classes) CHECK(curr.known_classes.count(c) == 1);
  }

  // Withheld and not-yet-introduced classes score as unknown.
  CHECK(e1.eval_class(8) == 7);
  CHECK(e1.eval_class(3) == 7);
  CHECK(e1.eval_class(1) == 1);
  const EvalSet e3 = cumulative_eval_set(s, 3);
  CHECK(e3.eval_class(8) == 7);
  CHECK(e3.eval_class(5) == 5);

  CHECK_THROWS_AS(cumulative_eval_set(s, 0), ScheduleError);
  CHECK_THROWS_AS(cumulative_eval_set(s, 4), ScheduleError);
}

TEST_CASE("filter_annotations keeps only the current task's classes") {
  const TaskSchedule s = build_schedule(weather_config());
  const std::vector<DetectionRecord> records = {
      make_record("a", 1), make_record("a", 3), make_record("a", 4),
      make_record("b", 8), make_record("b", 5)};

  const auto t2 = filter_annotations(records, s, 2);
  REQUIRE(t2.size() == 2);
  CHECK(t2[0].category_id == 3);
  CHECK(t2[1].category_id == 4);

  // Withheld classes never survive the filter.
  for (std::uint32_t t = 1; t <= 3; ++t) {
    for (const DetectionRecord& r : filter_annotations(records, s, t)) {
      CHECK(r.category_id != 8);
    }
  }

  // Idempotent.
  const auto again = filter_annotations(t2, s, 2);
  REQUIRE(again.size() == t2.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].category_id == t2[i].category_id);
  }
}

TEST_CASE("relabel_for_eval maps out-of-set classes to the sentinel") {
  const TaskSchedule s = build_schedule(weather_config());
  const EvalSet e1 = cumulative_eval_set(s, 1);
  const std::vector<DetectionRecord> gt = {make_record("a", 1),
                                           make_record("a", 8),
                                           make_record("a", 5)};
  const auto relabeled = ewod::protocol::relabel_for_eval(gt, e1);
  CHECK(relabeled[0].category_id == 1);
  CHECK(relabeled[1].category_id == 7);
  CHECK(relabeled[2].category_id == 7);
}

TEST_CASE("schedule json round-trips and re-validates") {
  const TaskSchedule s = build_schedule(weather_config());
  const std::string text = ewod::protocol::schedule_to_json(s);
  const TaskSchedule back = ewod::protocol::schedule_from_json(text);
  CHECK(back.tasks.size() == s.tasks.size());
  CHECK(back.withheld == s.withheld);
  CHECK(back.class_names == s.class_names);
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    CHECK(back.tasks[i].domain == s.tasks[i].domain);
    CHECK(back.tasks[i].classes == s.tasks[i].classes);
  }

  // A tampered id layout is rejected on load.
  std::string bad = text;
  const auto pos = bad.find("[\n        3,\n        4\n      ]");
  if (pos != std::string::npos) {
    bad.replace(pos, 30, "[\n        1,\n        4\n      ]");
    CHECK_THROWS_AS(ewod::protocol::schedule_from_json(bad), ScheduleError);
  } else {
    // Fallback: hand-build an invalid schedule.
    TaskSchedule broken = s;
    broken.tasks[1].classes = {1, 4};
    CHECK_THROWS_AS(ewod::protocol::validate_schedule(broken), ScheduleError);
  }

  const auto path = std::filesystem::temp_directory_path() / "ewod_sched.json";
  ewod::protocol::save_schedule(path, s);
  const TaskSchedule loaded = ewod::protocol::load_schedule(path);
  CHECK(loaded.class_names == s.class_names);
  std::filesystem::remove(path);
}

TEST_CASE("detection records round-trip through json lines") {
  std::vector<DetectionRecord> records = {make_record("img_1", 2, 0.75),
                                          make_record("img_2", 7)};
  records[0].domain = "night_sunny";

  const auto path = std::filesystem::temp_directory_path() / "ewod_recs.jsonl";
  ewod::protocol::write_records(path, records);
  const auto back = ewod::protocol::read_records(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].image_id == "img_1");
  CHECK(back[0].domain == "night_sunny");
  CHECK(back[0].category_id == 2);
  CHECK(back[0].score == 0.75);
  CHECK(back[0].has_score());
  CHECK_FALSE(back[1].has_score());
  for (int i = 0; i < 4; ++i) CHECK(back[0].bbox[i] == records[0].bbox[i]);

  // Parse errors carry the line number.
  std::ofstream bad(path, std::ios::app);
  bad << "{\"image_id\": \"x\"}\n";
  bad.close();
  try {
    ewod::protocol::read_records(path);
    FAIL("expected parse failure");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  std::filesystem::remove(path);
}
