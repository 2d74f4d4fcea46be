#include "ovmm/agent.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace ovmm {
namespace {

constexpr double kPi = std::numbers::pi;

// Value for a joint delta: zero below the band's lower edge, clipped to the upper edge.
double in_band(double x, double lo, double hi) {
  if (std::abs(x) < lo) return 0.0;
  return std::copysign(std::min(std::abs(x), hi), x);
}

double advance_of(const Action& a, const ActionConfig& cfg) {
  if (const auto* m = std::get_if<DiscreteMove>(&a)) {
    return m->kind == DiscreteMove::Kind::Forward ? cfg.forward_step : 0.0;
  }
  if (const auto* w = std::get_if<Waypoint>(&a)) return std::hypot(w->dx, w->dy);
  if (const auto* j = std::get_if<JointDeltas>(&a)) return std::abs(j->base_forward);
  return 0.0;
}

// Once every frontier is gone: the reachable cell farthest from the path
// driven so far, to look at the scene from somewhere new.
Cell revisit_goal(const SemanticMap& map, const BinaryGrid& trav, Cell robot, double min_distance) {
  std::vector<Cell> past;
  const BinaryGrid& visited = map.channel(map.past_channel());
  for (int r = 0; r < visited.rows(); ++r) {
    for (int c = 0; c < visited.cols(); ++c) {
      if (visited(r, c) && trav(r, c)) past.push_back({r, c});
    }
  }
  if (past.empty()) past.push_back(robot);
  const double h = map.config().cell_size;
  const Cell src[] = {robot};
  const DistanceField from_robot = fmm_distance_field(trav, src, h);
  const DistanceField from_past = fmm_distance_field(trav, past, h);
  const BinaryGrid& explored = map.channel(map.explored_channel());
  std::optional<Cell> best;
  double best_d = min_distance;
  for (int r = 0; r < trav.rows(); ++r) {
    for (int c = 0; c < trav.cols(); ++c) {
      if (!explored(r, c) || !from_robot.reachable({r, c})) continue;
      const double d = from_past.at({r, c});
      if (d < kUnreachable && d > best_d) {
        best_d = d;
        best = Cell{r, c};
      }
    }
  }
  if (!best) throw Error("exploration exhausted");
  return *best;
}

struct TargetView {
  InstanceId id = 0;
  Vec3 point;
  int pixels = 0;
};

}  // namespace

std::string to_string(SkillPhase p) {
  switch (p) {
    case SkillPhase::FindObject:
      return "find_object";
    case SkillPhase::Gaze:
      return "gaze";
    case SkillPhase::Grasp:
      return "grasp";
    case SkillPhase::FindReceptacle:
      return "find_receptacle";
    case SkillPhase::Place:
      return "place";
    case SkillPhase::Done:
      return "done";
    case SkillPhase::Failed:
      return "failed";
  }
  return "failed";
}

PointCloud category_cloud(const Observation& obs, const std::string& category, const Pose2& pose,
                          const CameraModel& camera, int upsample, std::optional<InstanceId> only) {
  const Frame& f = obs.frame;
  std::vector<std::uint8_t> mask(f.semantic.size(), 0);
  for (std::size_t i = 0; i < f.semantic.size(); ++i) {
    const InstanceId id = f.semantic[i];
    if (id == 0 || (only && id != *only)) continue;
    auto it = obs.labels.find(id);
    if (it != obs.labels.end() && it->second == category && f.depth[i] != kInvalidDepth) mask[i] = 1;
  }
  const RayGenerator rays(camera, camera_pose(pose, obs.joints, camera));
  PointCloud cloud;
  const int k = std::max(1, upsample);
  auto at = [&](int u, int v) { return static_cast<std::size_t>(v) * f.width + u; };
  for (int v = 0; v < f.height; ++v) {
    for (int u = 0; u < f.width; ++u) {
      if (!mask[at(u, v)]) continue;
      const bool patch = u + 1 < f.width && v + 1 < f.height && mask[at(u + 1, v)] &&
                         mask[at(u, v + 1)] && mask[at(u + 1, v + 1)];
      const int n = patch ? k : 1;
      for (int sv = 0; sv < n; ++sv) {
        for (int su = 0; su < n; ++su) {
          const double a = static_cast<double>(su) / n;
          const double b = static_cast<double>(sv) / n;
          const double d = (1 - a) * (1 - b) * f.depth[at(u, v)] + a * (1 - b) * f.depth[at(u + (n > 1), v)] +
                           (1 - a) * b * f.depth[at(u, v + (n > 1))] +
                           a * b * f.depth[at(u + (n > 1), v + (n > 1))];
          const PixelRay r = rays.ray_at(u + 0.5 + a, v + 0.5 + b);
          cloud.points.push_back(r.origin + d * r.dir);
        }
      }
    }
  }
  return cloud;
}

HeuristicAgent::HeuristicAgent(AgentConfig config) : config_(std::move(config)), map_(config_.map) {}

void HeuristicAgent::reset(const std::string&, const GoalSpec& goal, std::uint64_t seed) {
  map_ = SemanticMap(config_.map);
  collisions_ = BinaryGrid(map_.rows(), map_.cols());
  goal_ = goal;
  seed_ = seed;
  phase_ = SkillPhase::FindObject;
  failure_.clear();
  decision_.reset();
  spin_left_ = config_.initial_spin;
  last_pose_.reset();
  expected_advance_ = 0.0;
  last_blocked_ = false;
  lost_ = 0;
  grasp_failures_ = 0;
  awaiting_grasp_ = false;
  approach_blocked_ = false;
  turned_for_reach_ = 0.0;
  last_reach_ = std::numeric_limits<double>::infinity();
  target_id_.reset();
  target_point_.reset();
  place_step_ = PlaceStep::Estimate;
  place_estimates_ = 0;
  align_moves_ = 0;
  place_retries_ = 0;
  settle_left_ = 0;
}

bool HeuristicAgent::label_visible(const Observation& obs, const std::string& category) const {
  return std::any_of(obs.labels.begin(), obs.labels.end(),
                     [&](const auto& kv) { return kv.second == category; });
}

void HeuristicAgent::note_collision(const Observation& obs) {
  last_blocked_ = false;
  last_progress_ = 1.0;
  if (!last_pose_ || expected_advance_ <= 0.0) return;
  const Pose2& now = obs.pose_rel_start;
  const double moved = (now.position() - last_pose_->position()).norm();
  last_progress_ = moved / expected_advance_;
  if (moved >= 0.5 * expected_advance_) return;
  last_blocked_ = true;
  if (obs.mode != RobotMode::Navigation) return;
  // Mark a small patch just ahead of the robot as blocked.
  const Vec2 fwd{std::cos(now.yaw), std::sin(now.yaw)};
  const Vec2 side{-fwd.y, fwd.x};
  for (double a = 0.25; a <= 0.35 + 1e-9; a += 0.025) {
    for (double b = -0.15; b <= 0.15 + 1e-9; b += 0.025) {
      const Cell c = map_.cell_of(now.position() + a * fwd + b * side);
      if (collisions_.in_bounds(c)) collisions_[c] = 1;
    }
  }
}

Action HeuristicAgent::turn_in_place(bool left) const {
  const double inc = config_.actions.turn_increment;
  if (config_.action_space == ActionSpace::Continuous) return Waypoint{0.0, 0.0, left ? inc : -inc};
  return DiscreteMove{left ? DiscreteMove::Kind::TurnLeft : DiscreteMove::Kind::TurnRight};
}

Action HeuristicAgent::act(const Observation& obs) {
  note_collision(obs);
  Action action = DiscreteMove{DiscreteMove::Kind::Stop};
  try {
    update_map(map_, obs, obs.pose_rel_start, config_.camera,
               {goal_.object_category, goal_.start_receptacle_category,
                goal_.goal_receptacle_category});
    std::optional<Action> a;
    for (int guard = 0; guard < 8 && !a; ++guard) a = step_phase(obs);
    if (!a) throw Error(fmt::format("skill {} produced no action", to_string(phase_)));
    action = *a;
  } catch (const Error& e) {
    phase_ = SkillPhase::Failed;
    failure_ = e.what();
    action = DiscreteMove{DiscreteMove::Kind::Stop};
  }
  last_pose_ = obs.pose_rel_start;
  expected_advance_ = advance_of(action, config_.actions);
  return action;
}

std::optional<Action> HeuristicAgent::step_phase(const Observation& obs) {
  switch (phase_) {
    case SkillPhase::FindObject:
      return find_object(obs);
    case SkillPhase::Gaze:
      return gaze(obs);
    case SkillPhase::Grasp:
      return grasp(obs);
    case SkillPhase::FindReceptacle:
      return find_receptacle(obs);
    case SkillPhase::Place:
      return place(obs);
    case SkillPhase::Done:
    case SkillPhase::Failed:
      return DiscreteMove{DiscreteMove::Kind::Stop};
  }
  return DiscreteMove{DiscreteMove::Kind::Stop};
}

std::optional<Action> HeuristicAgent::navigate(const Observation& obs, TaskPhase task) {
  const Pose2& pose = obs.pose_rel_start;
  const Cell here = map_.cell_of(pose.position());

  // Plan on the part of the map that holds information.
  CellBox box;
  box.expand(here);
  const int info[] = {0, 1, 2, map_.obstacle_channel(), map_.explored_channel()};
  for (int k : info) {
    if (k >= map_.channel_count()) continue;
    const BinaryGrid& g = map_.channel(k);
    for (int r = 0; r < g.rows(); ++r) {
      const auto* row = &g(r, 0);
      for (int c = 0; c < g.cols(); ++c) {
        if (row[c]) box.expand({r, c});
      }
    }
  }
  const int inflate = static_cast<int>(std::ceil(config_.obstacle_inflation / map_.config().cell_size - 1e-9));
  const CellBox win = box.padded(config_.crop_padding + inflate, map_.rows(), map_.cols());
  const SemanticMap local = map_.cropped(win.r0, win.c0, win.r1, win.c1);
  const Cell robot{here.row - win.r0, here.col - win.c0};

  BinaryGrid blocked = local.channel(local.obstacle_channel());
  for (int r = 0; r < blocked.rows(); ++r) {
    for (int c = 0; c < blocked.cols(); ++c) {
      if (collisions_(r + win.r0, c + win.c0)) blocked(r, c) = 1;
    }
  }
  BinaryGrid trav = dilate_disk(blocked, config_.obstacle_inflation / map_.config().cell_size);
  for (auto& v : trav.raw()) v = !v;
  // The robot may start inside the inflated margin; free its own disc so it can leave.
  for (int dr = -inflate; dr <= inflate; ++dr) {
    for (int dc = -inflate; dc <= inflate; ++dc) {
      const int r = robot.row + dr;
      const int c = robot.col + dc;
      if (trav.in_bounds(r, c) && !blocked(r, c)) trav(r, c) = 1;
    }
  }

  const double h = local.config().cell_size;
  auto explore = [&]() -> NavGoalDecision {
    try {
      return {NavRule::Frontier, {select_frontier_goal(local.channel(local.explored_channel()), trav,
                                                       robot, config_.nav.min_frontier_distance, h)}};
    } catch (const Error&) {
      return {NavRule::Frontier, {revisit_goal(local, trav, robot, config_.revisit_distance)}};
    }
  };

  NavGoalDecision decision;
  try {
    decision = select_nav_goal(local, task, robot, trav, {}, config_.nav);
  } catch (const Error&) {
    decision = explore();
  }
  std::vector<Cell> goals = decision.rule == NavRule::Frontier
                                ? decision.goal_cells
                                : project_goals(decision.goal_cells, trav);
  std::optional<DistanceField> field;
  if (!goals.empty()) {
    field = fmm_distance_field(trav, goals, h);
    if (!field->reachable(robot)) field.reset();
  }
  if (!field && decision.rule != NavRule::Frontier) {
    // The semantic goal cannot be reached from here; keep exploring.
    decision = explore();
    field = fmm_distance_field(trav, decision.goal_cells, h);
  }
  if (!field || !field->reachable(robot)) throw Error("goal unreachable");

  const bool arrival_rule = decision.rule == NavRule::ObjectCooccurrence ||
                            decision.rule == NavRule::GoalReceptacle;
  const std::string& category =
      task == TaskPhase::FindObject ? goal_.object_category : goal_.goal_receptacle_category;
  const bool visible = label_visible(obs, category);

  // Decision cells in full-map coordinates, for inspection.
  NavGoalDecision global = decision;
  for (Cell& c : global.goal_cells) c = {c.row + win.r0, c.col + win.c0};
  decision_ = global;

  if (arrival_rule && nav_stop_condition(decision, pose.position(), local.frame(), visible,
                                         config_.stop_radius)) {
    return std::nullopt;
  }
  const Action a = plan_step(*field, pose, config_.action_space, local.frame(), config_.planner);
  if (!is_stop(a)) return a;
  if (arrival_rule && visible) return std::nullopt;
  // At the bottom of the field without a reason to stop: look around.
  return turn_in_place(true);
}

std::optional<Action> HeuristicAgent::find_object(const Observation& obs) {
  if (spin_left_ > 0) {
    --spin_left_;
    return turn_in_place(true);
  }
  if (auto a = navigate(obs, TaskPhase::FindObject)) return a;
  phase_ = config_.gaze_enabled ? SkillPhase::Gaze : SkillPhase::Grasp;
  lost_ = 0;
  approach_blocked_ = false;
  turned_for_reach_ = 0.0;
  last_reach_ = std::numeric_limits<double>::infinity();
  return std::nullopt;
}

std::optional<Action> HeuristicAgent::gaze(const Observation& obs) {
  const Pose2& pose = obs.pose_rel_start;
  const CameraModel& cam = config_.camera;
  const RayGenerator rays(cam, camera_pose(pose, obs.joints, cam));

  // Visible instances of the target category; prefer ones on the start receptacle.
  std::map<InstanceId, TargetView> views;
  const Frame& f = obs.frame;
  for (int v = 0; v < f.height; ++v) {
    for (int u = 0; u < f.width; ++u) {
      const auto i = static_cast<std::size_t>(v) * f.width + u;
      const InstanceId id = f.semantic[i];
      if (id == 0) continue;
      auto it = obs.labels.find(id);
      if (it == obs.labels.end() || it->second != goal_.object_category) continue;
      TargetView& tv = views[id];
      tv.id = id;
      tv.point = tv.point + rays.backproject(u, v, f.depth[i]);
      ++tv.pixels;
    }
  }
  const BinaryGrid near_start = dilate_chebyshev(map_.channel(1), 2);
  std::optional<TargetView> best;
  bool best_on_start = false;
  for (auto& [id, tv] : views) {
    tv.point = (1.0 / tv.pixels) * tv.point;
    const Cell c = map_.cell_of(tv.point.xy());
    const bool on_start = map_.in_bounds(c) && near_start[c];
    const bool sticky = target_id_ && *target_id_ == id;
    if (!best || std::tuple(on_start, sticky, tv.pixels) > std::tuple(best_on_start, target_id_ && *target_id_ == best->id, best->pixels)) {
      best = tv;
      best_on_start = on_start;
    }
  }

  if (best) {
    lost_ = 0;
    target_id_ = best->id;
    target_point_ = best->point;
  } else if (++lost_ > config_.lost_frames) {
    phase_ = SkillPhase::FindObject;
    target_id_.reset();
    target_point_.reset();
    lost_ = 0;
    return std::nullopt;
  }
  if (!target_point_) return JointDeltas{};
  const Vec3 p = *target_point_;
  const Vec2 to = p.xy() - pose.position();
  const double range = to.norm();
  const double bearing = wrap_angle(std::atan2(to.y, to.x) - pose.yaw);
  const ActionConfig& ac = config_.actions;

  if (best && !approach_blocked_ && !last_blocked_ &&
      range > config_.gaze_approach_range + ac.base_forward_min) {
    JointDeltas d;
    if (std::abs(bearing) > 0.26) {
      d.base_turn = in_band(bearing, ac.base_turn_min, ac.base_turn_max);
    } else {
      d.base_forward = std::min(ac.base_forward_max, range - config_.gaze_approach_range);
    }
    return d;
  }
  if (last_blocked_) approach_blocked_ = true;

  const Vec3 ee = end_effector_position(pose, obs.joints);
  const double reach = (p - ee).norm();
  if (reach > config_.grasp_reach && turned_for_reach_ < kPi / 2) {
    if (reach > last_reach_) {
      // Swung past the closest heading: undo the last increment and settle there.
      turned_for_reach_ = kPi / 2;
      JointDeltas d;
      d.base_turn = -ac.rotary_max;
      d.head_pan = ac.rotary_max;
      return d;
    }
    last_reach_ = reach;
    // Turn left so the arm side swings toward the object while the head
    // pans back by the same angle.
    JointDeltas d;
    d.base_turn = ac.rotary_max;
    d.head_pan = -ac.rotary_max;
    turned_for_reach_ += ac.rotary_max;
    return d;
  }

  const Vec3 eye = camera_pose(pose, obs.joints, cam).position;
  const double want_pan = wrap_angle(std::atan2(p.y - eye.y, p.x - eye.x) - pose.yaw);
  const double want_tilt = std::atan2(p.z - eye.z, (p.xy() - eye.xy()).norm());
  const double err_pan = wrap_angle(want_pan - obs.joints.head_pan);
  const double err_tilt = want_tilt - obs.joints.head_tilt;

  const auto center = static_cast<std::size_t>(f.height / 2) * f.width + f.width / 2;
  const bool centered_on_target = best && f.semantic[center] == best->id;
  if (best && (centered_on_target || (std::abs(err_pan) < ac.rotary_min && std::abs(err_tilt) < ac.rotary_min))) {
    if (reach <= config_.grasp_reach || turned_for_reach_ >= kPi / 2) {
      phase_ = SkillPhase::Grasp;
      return std::nullopt;
    }
  }
  JointDeltas d;
  d.head_pan = in_band(err_pan, ac.rotary_min, ac.rotary_max);
  d.head_tilt = in_band(err_tilt, ac.rotary_min, ac.rotary_max);
  if (!best) return d;  // wait for the target to reappear
  if (d.head_pan == 0.0 && d.head_tilt == 0.0) {
    phase_ = SkillPhase::Grasp;
    return std::nullopt;
  }
  return d;
}

std::optional<Action> HeuristicAgent::grasp(const Observation& obs) {
  auto retry = [&](const char* why) -> std::optional<Action> {
    if (++grasp_failures_ > config_.grasp_retries) {
      throw Error(fmt::format("grasp failed after {} attempts ({})", grasp_failures_, why));
    }
    phase_ = config_.gaze_enabled ? SkillPhase::Gaze : SkillPhase::FindObject;
    return std::nullopt;
  };
  if (awaiting_grasp_) {
    awaiting_grasp_ = false;
    if (obs.holding) {
      phase_ = SkillPhase::FindReceptacle;
      return std::nullopt;
    }
    return retry("snap grasp missed");
  }
  const PointCloud cloud = category_cloud(obs, goal_.object_category, obs.pose_rel_start,
                                          config_.camera, config_.cloud_upsample, target_id_);
  if (cloud.empty()) {
    // Dropped from this frame only; gaze keeps its own count of lost frames.
    phase_ = config_.gaze_enabled ? SkillPhase::Gaze : SkillPhase::FindObject;
    return std::nullopt;
  }
  if (score_grasps(cloud, config_.gripper, config_.grasp).empty()) return retry("no grasp candidate");
  awaiting_grasp_ = true;
  return Grasp{};
}

std::optional<Action> HeuristicAgent::find_receptacle(const Observation& obs) {
  const ActionConfig& ac = config_.actions;
  const Joints defaults;
  JointDeltas d;
  d.head_pan = in_band(defaults.head_pan - obs.joints.head_pan, ac.rotary_min, ac.rotary_max);
  d.head_tilt = in_band(defaults.head_tilt - obs.joints.head_tilt, ac.rotary_min, ac.rotary_max);
  if (d.head_pan != 0.0 || d.head_tilt != 0.0) return d;
  if (auto a = navigate(obs, TaskPhase::FindReceptacle)) return a;
  phase_ = SkillPhase::Place;
  lost_ = 0;
  place_step_ = PlaceStep::Estimate;
  align_moves_ = 0;
  return std::nullopt;
}

std::optional<Action> HeuristicAgent::place(const Observation& obs) {
  const Pose2& pose = obs.pose_rel_start;
  const ActionConfig& ac = config_.actions;
  auto estimate = [&](bool reach_only) -> std::optional<Vec3> {
    PointCloud cloud = category_cloud(obs, goal_.goal_receptacle_category, pose, config_.camera);
    if (cloud.empty()) {
      if (++lost_ > config_.lost_frames) throw Error("place target lost");
      return std::nullopt;
    }
    lost_ = 0;
    {
      // Only the top surface can hold the object; drop the receptacle's sides.
      std::vector<double> z;
      for (const Vec3& p : cloud.points) z.push_back(p.z);
      const auto k = z.size() * 49 / 50;
      std::nth_element(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(k), z.end());
      const double top = z[k];
      std::erase_if(cloud.points, [&](const Vec3& p) {
        return std::abs(p.z - top) > config_.placement.height_tolerance;
      });
    }
    if (reach_only) {
      // Points the arm can reach after the manipulation turn.
      PointCloud reachable;
      const Vec2 fwd{std::cos(pose.yaw), std::sin(pose.yaw)};
      for (const Vec3& p : cloud.points) {
        const Vec2 d = p.xy() - pose.position();
        const double along = d.x * fwd.x + d.y * fwd.y;
        const double across = -d.x * fwd.y + d.y * fwd.x;
        if (along >= kArmBaseOffset + 0.05 && along <= kArmBaseOffset + ac.limits.extension_max - 0.02 &&
            std::abs(across) <= 0.3) {
          reachable.points.push_back(p);
        }
      }
      if (!reachable.empty()) cloud = std::move(reachable);
    }
    const auto seed = derive_seed(seed_, fmt::format("place/{}", place_estimates_++));
    return estimate_placement_point(cloud, seed, config_.placement).point;
  };

  switch (place_step_) {
    case PlaceStep::Estimate:
      if (auto p = estimate(false)) {
        place_point_ = *p;
      } else {
        return JointDeltas{};
      }
      place_step_ = PlaceStep::Face;
      [[fallthrough]];
    case PlaceStep::Face: {
      const Vec2 to = place_point_.xy() - pose.position();
      const double turn = in_band(wrap_angle(std::atan2(to.y, to.x) - pose.yaw), ac.base_turn_min,
                                  ac.base_turn_max);
      if (turn != 0.0) {
        JointDeltas d;
        d.base_turn = turn;
        return d;
      }
      place_step_ = PlaceStep::Approach;
      [[fallthrough]];
    }
    case PlaceStep::Approach: {
      const double dist = (place_point_.xy() - pose.position()).norm();
      if (!last_blocked_ && dist - config_.place_approach >= ac.base_forward_min) {
        JointDeltas d;
        d.base_forward = std::min(ac.base_forward_max, dist - config_.place_approach);
        return d;
      }
      place_step_ = PlaceStep::Reestimate;
      [[fallthrough]];
    }
    case PlaceStep::Reestimate:
      if (auto p = estimate(true)) {
        place_point_ = *p;
      } else {
        return JointDeltas{};
      }
      try {
        // Validates the workspace before committing to manipulation mode.
        const Pose2 turned{pose.x, pose.y, pose.yaw + kPi / 2};
        solve_arm_reach(turned, place_point_, config_.place_clearance, ac.limits);
      } catch (const Error&) {
        if (++place_retries_ > config_.grasp_retries) throw;
        place_step_ = PlaceStep::Estimate;
        return JointDeltas{};
      }
      place_step_ = PlaceStep::Manipulate;
      return EnterManipulationMode{};
    case PlaceStep::Manipulate:
      place_step_ = PlaceStep::Lift;
      [[fallthrough]];
    case PlaceStep::Lift: {
      const ArmReach reach = solve_arm_reach(pose, place_point_, config_.place_clearance, ac.limits);
      const double lift = in_band(reach.lift - obs.joints.lift, ac.arm_min, ac.arm_max);
      if (lift != 0.0) {
        JointDeltas d;
        d.lift = lift;
        return d;
      }
      place_step_ = PlaceStep::Align;
      [[fallthrough]];
    }
    case PlaceStep::Align: {
      const ArmReach reach = solve_arm_reach(pose, place_point_, config_.place_clearance, ac.limits);
      const double rem = reach.base_forward;
      // A truncated slide means the base is against the receptacle; extend from here.
      if (std::abs(rem) >= 0.02 && last_progress_ > 0.9 && align_moves_ < 4) {
        ++align_moves_;
        JointDeltas d;
        // Moves below the band minimum are made by backing off first.
        d.base_forward = std::abs(rem) >= ac.base_forward_min
                             ? std::copysign(std::min(std::abs(rem), ac.base_forward_max), rem)
                             : -std::copysign(ac.base_forward_min, rem);
        return d;
      }
      place_step_ = PlaceStep::Extend;
      [[fallthrough]];
    }
    case PlaceStep::Extend: {
      const ArmReach reach = solve_arm_reach(pose, place_point_, config_.place_clearance, ac.limits);
      const double ext = in_band(reach.extension - obs.joints.arm_extension, ac.arm_min, ac.arm_max);
      if (ext != 0.0) {
        JointDeltas d;
        d.arm_extension = ext;
        return d;
      }
      place_step_ = PlaceStep::Release;
      [[fallthrough]];
    }
    case PlaceStep::Release:
      place_step_ = PlaceStep::Settle;
      settle_left_ = config_.settle_steps;
      return Release{};
    case PlaceStep::Settle:
      if (settle_left_-- > 0) return JointDeltas{};
      phase_ = SkillPhase::Done;
      return DiscreteMove{DiscreteMove::Kind::Stop};
  }
  return std::nullopt;
}

EpisodeRun run_episode(const Scene& scene, const Episode& episode, Agent& agent,
                       const SimConfig& sim_config, const MetricProfile& profile,
                       std::uint64_t seed, const StepObserver& observer) {
  Simulator sim(scene, episode, sim_config, seed);
  std::string failure;
  bool protocol_failure = false;
  try {
    agent.reset(episode.id, {episode.object_category, episode.start_receptacle_category,
                             episode.goal_receptacle_category},
                seed);
    while (!sim.stopped() && sim.state().step_count < profile.step_limit) {
      const Observation obs = sim.observe();
      const Action action = agent.act(obs);
      if (observer) observer(obs, action, sim);
      try {
        sim.step(action);
      } catch (const ActionError& e) {
        failure = fmt::format("invalid action: {}", e.what());
        break;
      }
    }
  } catch (const ProtocolError& e) {
    protocol_failure = true;
    spdlog::warn("episode {}: protocol error: {}", episode.id, e.what());
  } catch (const Error& e) {
    failure = e.what();
  }
  EpisodeRun run;
  run.trace = sim.trace();
  StageOutcome outcome = evaluate_trace(run.trace, profile);
  if (protocol_failure) {
    // A broken connection voids the episode regardless of what the trace shows.
    outcome = StageOutcome{};
    outcome.steps_per_stage[0] = sim.state().step_count;
    failure = "protocol";
  }
  run.result = make_result(episode.id, outcome, sim.state().step_count);
  run.result.seed = seed;
  run.result.failure_reason = failure.empty() ? agent.failure() : failure;
  try {
    agent.finish(run.result);
  } catch (const Error& e) {
    if (run.result.failure_reason.empty()) run.result.failure_reason = e.what();
  }
  return run;
}

}  // namespace ovmm
