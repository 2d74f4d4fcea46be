#include <doctest.h>

#include <cmath>
#include <limits>

#include "ovmm/evaluation.hpp"

using namespace ovmm;

namespace {

constexpr double kFar = std::numeric_limits<double>::infinity();

TraceStep idle(int step) {
  TraceStep t;
  t.step = step;
  t.target_viewpoint_distance = kFar;
  t.goal_viewpoint_distance = kFar;
  t.target_object_distance = kFar;
  t.goal_receptacle_distance = kFar;
  t.grasp_distance = kFar;
  return t;
}

Trace trace_of(int n) {
  Trace tr;
  tr.frame_pixels = 160 * 120;
  for (int i = 1; i <= n; ++i) tr.steps.push_back(idle(i));
  return tr;
}

void see_target(TraceStep& t, double dist, int pixels) {
  t.target_viewpoint_distance = dist;
  t.target_pixels = pixels;
}

void see_goal(TraceStep& t, double dist, int pixels) {
  t.goal_viewpoint_distance = dist;
  t.goal_pixels = pixels;
}

void grasp(TraceStep& t, double dist, bool visible = true) {
  t.grasp_attempt = true;
  t.grasp_target_visible = visible;
  t.grasp_distance = dist;
  t.grasp_success = visible && dist <= 0.8;
}

void release_on_goal(Trace& tr, int index, int supported_steps) {
  tr.steps[index].release = true;
  tr.steps[index].released_on_goal = true;
  for (int k = 1; k <= supported_steps && index + k < static_cast<int>(tr.steps.size()); ++k) {
    tr.steps[index + k].object_on_goal = true;
  }
}

Trace full_success(int n = 200) {
  Trace tr = trace_of(n);
  see_target(tr.steps[9], 0.05, 30);
  grasp(tr.steps[19], 0.4);
  see_goal(tr.steps[49], 0.05, 200);
  release_on_goal(tr, 59, n);
  return tr;
}

EpisodeResult result_with(const std::string& id, int stages) {
  StageOutcome o;
  o.find_obj = stages > 0;
  o.pick = stages > 1;
  o.find_rec = stages > 2;
  o.place = stages > 3;
  return make_result(id, o, 100);
}

}  // namespace

TEST_SUITE("evaluation") {
  const MetricProfile sim = MetricProfile::sim();

  TEST_CASE("find object examples") {
    Trace tr = trace_of(5);
    see_target(tr.steps[2], 0.05, 30);
    CHECK(check_find_obj(tr, sim));
    tr = trace_of(5);
    see_target(tr.steps[2], 0.05, 10);
    CHECK_FALSE(check_find_obj(tr, sim));
    tr = trace_of(5);
    see_target(tr.steps[2], 0.5, 19200);
    CHECK_FALSE(check_find_obj(tr, sim));
  }

  TEST_CASE("pick examples") {
    Trace tr = trace_of(10);
    see_target(tr.steps[1], 0.05, 30);
    grasp(tr.steps[4], 0.7);
    CHECK(check_pick(tr, sim));

    Trace no_find = trace_of(10);
    grasp(no_find.steps[4], 0.7);
    CHECK_FALSE(check_pick(no_find, sim));

    Trace far = trace_of(10);
    see_target(far.steps[1], 0.05, 30);
    grasp(far.steps[4], 0.9);
    CHECK_FALSE(check_pick(far, sim));

    Trace unseen = trace_of(10);
    see_target(unseen.steps[1], 0.05, 30);
    grasp(unseen.steps[4], 0.5, false);
    CHECK_FALSE(check_pick(unseen, sim));
  }

  TEST_CASE("place examples") {
    CHECK(check_place(full_success(), sim));

    Trace short_settle = full_success(70);  // release at step 60, only 10 steps follow
    CHECK_FALSE(check_place(short_settle, sim));

    Trace floor = full_success();
    floor.steps[59].released_on_goal = false;
    for (auto& s : floor.steps) s.object_on_goal = false;
    CHECK_FALSE(check_place(floor, sim));

    Trace bumped = full_success();
    bumped.steps[59].release_arm_collision = true;
    CHECK_FALSE(check_place(bumped, sim));
  }

  TEST_CASE("stage chain is enforced") {
    Trace tr = full_success();
    tr.steps[9].target_pixels = 0;  // never found the object
    const StageOutcome o = evaluate_trace(tr, sim);
    CHECK_FALSE(o.find_obj);
    CHECK_FALSE(o.pick);
    CHECK_FALSE(o.place);
  }

  TEST_CASE("steps per stage") {
    const StageOutcome o = evaluate_trace(full_success(), sim);
    CHECK(o.flags() == std::array<bool, 4>{true, true, true, true});
    CHECK(o.steps_per_stage == std::array<int, 4>{10, 10, 30, 10});

    Trace partial = trace_of(120);
    see_target(partial.steps[9], 0.05, 30);
    const StageOutcome p = evaluate_trace(partial, sim);
    CHECK(p.steps_per_stage == std::array<int, 4>{10, 110, 0, 0});
  }

  TEST_CASE("real world profile checks proximity and visibility only") {
    const MetricProfile real = MetricProfile::real();
    Trace tr = trace_of(10);
    tr.steps[2].target_object_distance = 0.9;
    tr.steps[2].target_pixels = 1;
    CHECK(check_find_obj(tr, real));
    tr.steps[2].target_object_distance = 1.1;
    CHECK_FALSE(check_find_obj(tr, real));
    CHECK(MetricProfile::from_name("real").step_limit == 300);
    CHECK_THROWS_AS(MetricProfile::from_name("lab"), Error);
  }

  TEST_CASE("partial success") {
    CHECK(partial_success(result_with("a", 4).outcome) == 1.0);
    CHECK(partial_success(result_with("a", 1).outcome) == 0.25);
    CHECK(partial_success(result_with("a", 3).outcome) == 0.75);
    StageOutcome broken;
    broken.pick = true;
    CHECK_THROWS_AS(partial_success(broken), Error);
  }

  TEST_CASE("aggregate") {
    std::vector<EpisodeResult> all{result_with("a", 4), result_with("b", 4)};
    const SummaryTable s = aggregate(all);
    for (double r : s.stage_rate) CHECK(r == 1.0);
    CHECK(s.overall == 1.0);

    std::vector<EpisodeResult> mixed{result_with("a", 1), result_with("b", 3)};
    const SummaryTable m = aggregate(mixed);
    CHECK(m.partial == doctest::Approx(0.5));
    CHECK(m.attempt_rate[1] == 1.0);
    CHECK(m.attempt_rate[2] == 0.5);
    CHECK_THROWS_AS(aggregate(std::vector<EpisodeResult>{}), Error);
  }

  TEST_CASE("result json round trip and schema checks") {
    EpisodeResult r = result_with("ep", 2);
    r.seed = 12345678901234ULL;
    r.config_hash = "abc";
    r.failure_reason = "exploration exhausted";
    CHECK(result_from_json(result_to_json(r)) == r);
    Json bad = result_to_json(r);
    bad.erase("pick");
    CHECK_THROWS_AS(result_from_json(bad), Error);
    Json inconsistent = result_to_json(r);
    inconsistent["partial"] = 0.75;
    CHECK_THROWS_AS(result_from_json(inconsistent), Error);
  }

  TEST_CASE("trace json writes unreachable distances as null") {
    const Json j = trace_to_json(trace_of(1));
    CHECK(j["steps"][0]["target_viewpoint_distance"].is_null());
    CHECK(j["frame_pixels"] == 19200);
  }

  TEST_CASE("find-x reward") {
    const RewardParams p;
    CHECK(reward_find_x({2.0, 1.0, false}, {1.5, 0.8, false}, p) == doctest::Approx(0.695).epsilon(1e-12));
    CHECK(reward_find_x({1.0, 0.3, false}, {1.0, 0.3, false}, p) == doctest::Approx(-0.005));
    CHECK(reward_find_x({1.0, 0.3, false}, {1.0, 0.3, true}, p) == doctest::Approx(-0.305));
    RewardParams literal;
    literal.find.literal_collision_sign = true;
    CHECK(reward_find_x({1.0, 0.3, false}, {1.0, 0.3, true}, literal) == doctest::Approx(0.295));
    CHECK_THROWS_AS(reward_find_x({-1.0, 0, false}, {1.0, 0, false}, p), Error);
  }

  TEST_CASE("gaze reward and the once-per-object penalty") {
    CHECK(reward_gaze({1.0, 0, false}, {0.9, 0.4, false}) == doctest::Approx(0.195));
    CHECK(reward_gaze({0.6, 0, false}, {0.5, 0.0, false}) == doctest::Approx(0.2 + 1.0 - 0.005));
    CHECK(reward_gaze({0.6, 0, false}, {0.6, 0.0, false}, {}, {true, false}) == doctest::Approx(1.0 + 2.0 - 0.005));

    GazeRewardTracker tracker;
    const RewardState s{1.0, 0.0, false};
    CHECK(tracker.step(s, s, false, "obj_3") == doctest::Approx(-0.505));
    CHECK(tracker.step(s, s, false, "obj_3") == doctest::Approx(-0.005));
    CHECK(tracker.step(s, s, false, "obj_4") == doctest::Approx(-0.505));
  }

  TEST_CASE("place reward") {
    CHECK(reward_place({true, true}) == doctest::Approx(4.995));
    CHECK(reward_place({false, true}) == doctest::Approx(0.995));
    CHECK(reward_place({true, false}) == doctest::Approx(-1.005));
    CHECK(reward_place({false, false}) == doctest::Approx(-0.005));
  }

  TEST_CASE("summary formatting") {
    std::vector<EpisodeResult> rs{result_with("a", 4), result_with("b", 0)};
    const std::vector<std::pair<std::string, SummaryTable>> rows{{"run", aggregate(rs)}};
    const std::string text = format_summary(rows);
    CHECK(text.find("FindObj") != std::string::npos);
    CHECK(text.find("50.0") != std::string::npos);
  }
}
