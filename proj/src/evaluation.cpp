#include "ovmm/evaluation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ovmm {
namespace {

bool sees_target(const TraceStep& t, const Trace& trace, const MetricProfile& p) {
  if (p.real_world) return t.target_object_distance <= p.viewpoint_radius && t.target_pixels >= 1;
  return t.target_viewpoint_distance <= p.viewpoint_radius &&
         t.target_pixels >= p.pixel_fraction * trace.frame_pixels;
}

bool sees_goal(const TraceStep& t, const Trace& trace, const MetricProfile& p) {
  if (p.real_world) return t.goal_receptacle_distance <= p.viewpoint_radius && t.goal_pixels >= 1;
  return t.goal_viewpoint_distance <= p.viewpoint_radius &&
         t.goal_pixels >= p.pixel_fraction * trace.frame_pixels;
}

bool picked(const TraceStep& t, const MetricProfile& p) {
  if (!t.grasp_attempt || !t.grasp_target_visible) return false;
  if (p.real_world) return t.grasp_success;
  return t.grasp_distance <= p.pick_radius;
}

}  // namespace

MetricProfile MetricProfile::sim() { return {}; }

MetricProfile MetricProfile::real() {
  MetricProfile p;
  p.name = "real";
  p.viewpoint_radius = 1.0;
  p.pixel_fraction = 0.0;
  p.pick_radius = std::numeric_limits<double>::infinity();
  p.settle_steps = 0;
  p.lin_vel_thresh = 0.0;
  p.ang_vel_thresh = 0.0;
  p.step_limit = 300;
  p.real_world = true;
  return p;
}

MetricProfile MetricProfile::from_name(std::string_view name) {
  if (name == "sim") return sim();
  if (name == "real") return real();
  throw Error(fmt::format("unknown metric profile '{}'", name));
}

StageSteps stage_steps(const Trace& trace, const MetricProfile& profile) {
  StageSteps s;
  const auto& steps = trace.steps;
  std::size_t n = 0;
  while (n < steps.size() && steps[n].step <= profile.step_limit) ++n;

  std::size_t i = 0;
  for (; i < n && !s.find_obj; ++i) {
    if (sees_target(steps[i], trace, profile)) s.find_obj = steps[i].step;
  }
  for (; i < n && !s.pick; ++i) {
    if (picked(steps[i], profile)) s.pick = steps[i].step;
  }
  for (; i < n && !s.find_rec; ++i) {
    if (sees_goal(steps[i], trace, profile)) s.find_rec = steps[i].step;
  }
  for (; i < n && !s.place; ++i) {
    const TraceStep& t = steps[i];
    if (!t.release || !t.released_on_goal || t.release_arm_collision) continue;
    const std::size_t settle = static_cast<std::size_t>(std::max(0, profile.settle_steps));
    if (i + settle >= n) break;
    bool stays = true;
    for (std::size_t k = 1; k <= settle && stays; ++k) stays = steps[i + k].object_on_goal;
    if (stays) s.place = t.step;
  }
  return s;
}

bool check_find_obj(const Trace& trace, const MetricProfile& profile) {
  return stage_steps(trace, profile).find_obj.has_value();
}
bool check_pick(const Trace& trace, const MetricProfile& profile) {
  return stage_steps(trace, profile).pick.has_value();
}
bool check_find_rec(const Trace& trace, const MetricProfile& profile) {
  return stage_steps(trace, profile).find_rec.has_value();
}
bool check_place(const Trace& trace, const MetricProfile& profile) {
  return stage_steps(trace, profile).place.has_value();
}

StageOutcome evaluate_trace(const Trace& trace, const MetricProfile& profile) {
  const StageSteps s = stage_steps(trace, profile);
  StageOutcome o;
  o.find_obj = s.find_obj.has_value();
  o.pick = s.pick.has_value();
  o.find_rec = s.find_rec.has_value();
  o.place = s.place.has_value();
  int total = 0;
  for (const auto& t : trace.steps) {
    if (t.step <= profile.step_limit) total = t.step;
  }
  const std::optional<int> done[kStageCount] = {s.find_obj, s.pick, s.find_rec, s.place};
  int prev = 0;
  for (int k = 0; k < kStageCount; ++k) {
    if (done[k]) {
      o.steps_per_stage[k] = *done[k] - prev;
      prev = *done[k];
    } else {
      o.steps_per_stage[k] = total - prev;
      break;
    }
  }
  return o;
}

double partial_success(const StageOutcome& o) {
  const auto f = o.flags();
  int count = 0;
  for (int k = 0; k < kStageCount; ++k) {
    if (f[k] && k > 0 && !f[k - 1]) {
      throw Error(fmt::format("malformed trace: stage {} succeeded without {}", kStageNames[k],
                              kStageNames[k - 1]));
    }
    count += f[k];
  }
  return count / 4.0;
}

EpisodeResult make_result(std::string episode_id, const StageOutcome& outcome, int total_steps) {
  EpisodeResult r;
  r.episode_id = std::move(episode_id);
  r.outcome = outcome;
  r.partial = partial_success(outcome);
  r.overall = outcome.place;
  r.total_steps = total_steps;
  return r;
}

Json result_to_json(const EpisodeResult& r) {
  Json j;
  j["episode_id"] = r.episode_id;
  j["find_obj"] = r.outcome.find_obj;
  j["pick"] = r.outcome.pick;
  j["find_rec"] = r.outcome.find_rec;
  j["place"] = r.outcome.place;
  j["overall"] = r.overall;
  j["partial"] = r.partial;
  j["steps"] = r.total_steps;
  j["steps_per_stage"] = r.outcome.steps_per_stage;
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  j["failure_reason"] = r.failure_reason;
  return j;
}

Json trace_to_json(const Trace& trace) {
  auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  Json steps = Json::array();
  for (const auto& t : trace.steps) {
    steps.push_back({{"step", t.step},
                     {"action", t.action},
                     {"base", {t.base.x, t.base.y, t.base.yaw}},
                     {"mode", t.mode == RobotMode::Navigation ? "navigation" : "manipulation"},
                     {"target_pixels", t.target_pixels},
                     {"goal_pixels", t.goal_pixels},
                     {"target_viewpoint_distance", num(t.target_viewpoint_distance)},
                     {"goal_viewpoint_distance", num(t.goal_viewpoint_distance)},
                     {"target_object_distance", num(t.target_object_distance)},
                     {"goal_receptacle_distance", num(t.goal_receptacle_distance)},
                     {"collided", t.collided},
                     {"arm_collision", t.arm_collision},
                     {"grasp_attempt", t.grasp_attempt},
                     {"grasp_success", t.grasp_success},
                     {"grasp_target_visible", t.grasp_target_visible},
                     {"grasp_distance", num(t.grasp_distance)},
                     {"release", t.release},
                     {"released_on_goal", t.released_on_goal},
                     {"release_arm_collision", t.release_arm_collision},
                     {"object_on_goal", t.object_on_goal},
                     {"holding", t.holding}});
  }
  return {{"frame_pixels", trace.frame_pixels}, {"steps", steps}};
}

EpisodeResult result_from_json(const Json& j) {
  try {
    EpisodeResult r;
    r.episode_id = j.at("episode_id").get<std::string>();
    r.outcome.find_obj = j.at("find_obj").get<bool>();
    r.outcome.pick = j.at("pick").get<bool>();
    r.outcome.find_rec = j.at("find_rec").get<bool>();
    r.outcome.place = j.at("place").get<bool>();
    r.outcome.steps_per_stage = j.at("steps_per_stage").get<std::array<int, kStageCount>>();
    r.overall = j.at("overall").get<bool>();
    r.partial = j.at("partial").get<double>();
    r.total_steps = j.at("steps").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.failure_reason = j.at("failure_reason").get<std::string>();
    if (r.overall != r.outcome.place) throw Error("overall must equal the place stage");
    if (std::abs(r.partial - partial_success(r.outcome)) > 1e-12) {
      throw Error("partial does not match the stage booleans");
    }
    return r;
  } catch (const Json::exception& e) {
    throw Error(fmt::format("results schema mismatch: {}", e.what()));
  }
}

SummaryTable aggregate(std::span<const EpisodeResult> results) {
  if (results.empty()) throw Error("cannot aggregate an empty result set");
  SummaryTable s;
  s.episodes = results.size();
  std::array<int, kStageCount> succeeded{};
  std::array<double, kStageCount> step_sum{};
  double partial_sum = 0.0;
  double total_steps = 0.0;
  int overall = 0;
  for (const auto& r : results) {
    const auto f = r.outcome.flags();
    for (int k = 0; k < kStageCount; ++k) {
      if (k == 0 || f[k - 1]) s.attempt_rate[k] += 1.0;
      if (f[k]) {
        ++succeeded[k];
        step_sum[k] += r.outcome.steps_per_stage[k];
      }
    }
    overall += r.overall;
    partial_sum += r.partial;
    total_steps += r.total_steps;
  }
  const double n = static_cast<double>(results.size());
  for (int k = 0; k < kStageCount; ++k) {
    s.stage_rate[k] = succeeded[k] / n;
    s.attempt_rate[k] /= n;
    s.mean_steps[k] = succeeded[k] ? step_sum[k] / succeeded[k] : 0.0;
  }
  s.overall = overall / n;
  s.partial = partial_sum / n;
  s.mean_total_steps = total_steps / n;
  return s;
}

Json summary_to_json(const SummaryTable& s) {
  Json j;
  j["episodes"] = s.episodes;
  for (int k = 0; k < kStageCount; ++k) {
    j["stage_rate"][kStageNames[k]] = s.stage_rate[k];
    j["mean_steps"][kStageNames[k]] = s.mean_steps[k];
    j["attempt_rate"][kStageNames[k]] = s.attempt_rate[k];
  }
  j["overall"] = s.overall;
  j["partial"] = s.partial;
  j["mean_total_steps"] = s.mean_total_steps;
  return j;
}

std::string format_summary(std::span<const std::pair<std::string, SummaryTable>> rows) {
  std::size_t name_w = 6;
  for (const auto& [name, _] : rows) name_w = std::max(name_w, name.size());
  std::string out = fmt::format("{:<{}}  {:>5}  {:>7}  {:>6}  {:>7}  {:>7}  {:>7}  {:>9}\n",
                                "config", name_w, "n", "FindObj", "Pick", "FindRec", "Overall",
                                "Partial", "MeanSteps");
  for (const auto& [name, s] : rows) {
    out += fmt::format("{:<{}}  {:>5}  {:>7.1f}  {:>6.1f}  {:>7.1f}  {:>7.1f}  {:>7.1f}  {:>9.1f}\n",
                       name, name_w, s.episodes, 100.0 * s.stage_rate[0], 100.0 * s.stage_rate[1],
                       100.0 * s.stage_rate[2], 100.0 * s.overall, 100.0 * s.partial,
                       s.mean_total_steps);
  }
  out += "\nsteps per stage (successful episodes) / stage attempted %\n";
  for (const auto& [name, s] : rows) {
    out += fmt::format("{:<{}}", name, name_w);
    for (int k = 0; k < kStageCount; ++k) {
      out += fmt::format("  {}={:.1f}/{:.1f}", kStageNames[k], s.mean_steps[k],
                         100.0 * s.attempt_rate[k]);
    }
    out += "\n";
  }
  return out;
}

double reward_find_x(const RewardState& prev, const RewardState& cur, const RewardParams& p) {
  if (prev.d < 0.0 || cur.d < 0.0) throw Error("geodesic distance must be nonnegative");
  const auto& f = p.find;
  double r = f.alpha * (prev.d - cur.d);
  if (cur.d <= f.d_close) r += f.beta * (prev.theta - cur.theta);
  if (cur.did_collide) r += f.literal_collision_sign ? f.gamma : -f.gamma;
  return r + p.slack;
}

double reward_gaze(const RewardState& prev, const RewardState& cur, const RewardParams& p,
                   GazeEvent event) {
  const auto& g = p.gaze;
  double r = g.alpha * (prev.d - cur.d);
  if (cur.d <= g.gamma) r += g.beta * std::cos(cur.theta);
  if (event.success) r += g.success_bonus;
  if (event.wrong_object) r += g.wrong_object_penalty;
  return r + p.slack;
}

double GazeRewardTracker::step(const RewardState& prev, const RewardState& cur, bool success,
                               std::optional<std::string> centered_non_target) {
  GazeEvent e;
  e.success = success;
  if (centered_non_target) e.wrong_object = penalized_.insert(*centered_non_target).second;
  return reward_gaze(prev, cur, params_, e);
}

double reward_place(const PlaceEvent& event, const RewardParams& p) {
  double r = p.slack;
  if (event.released) {
    r += event.contact ? p.place.release_contact : p.place.failed_release;
  } else if (event.contact) {
    r += p.place.contact_per_step;
  }
  return r;
}

}  // namespace ovmm
