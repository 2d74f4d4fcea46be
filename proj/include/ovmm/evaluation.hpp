#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ovmm/io.hpp"
#include "ovmm/sim.hpp"

namespace ovmm {

/// Success thresholds. The simulation profile checks viewpoints and pixel
/// fractions; the real-world profile only asks for proximity to the object
/// or receptacle plus visibility.
struct MetricProfile {
  std::string name = "sim";
  double viewpoint_radius = 0.1;
  double pixel_fraction = 0.001;
  double pick_radius = 0.8;
  int settle_steps = 50;
  double lin_vel_thresh = 5e-3;
  double ang_vel_thresh = 5e-2;
  int step_limit = 1250;
  bool real_world = false;

  static MetricProfile sim();
  static MetricProfile real();
  static MetricProfile from_name(std::string_view name);
};

inline constexpr int kStageCount = 4;
inline constexpr std::array<const char*, kStageCount> kStageNames = {"find_obj", "pick", "find_rec",
                                                                      "place"};

struct StageOutcome {
  bool find_obj = false;
  bool pick = false;
  bool find_rec = false;
  bool place = false;
  /// Steps spent in each stage: up to its success, or up to the end of the
  /// episode for the stage that failed; 0 for stages never attempted.
  std::array<int, kStageCount> steps_per_stage{};

  std::array<bool, kStageCount> flags() const { return {find_obj, pick, find_rec, place}; }
  friend bool operator==(const StageOutcome&, const StageOutcome&) = default;
};

/// Trace step indices (1-based step numbers) at which each stage first
/// succeeded, in chain order.
struct StageSteps {
  std::optional<int> find_obj;
  std::optional<int> pick;
  std::optional<int> find_rec;
  std::optional<int> place;
};

StageSteps stage_steps(const Trace& trace, const MetricProfile& profile);

bool check_find_obj(const Trace& trace, const MetricProfile& profile);
bool check_pick(const Trace& trace, const MetricProfile& profile);
bool check_find_rec(const Trace& trace, const MetricProfile& profile);
bool check_place(const Trace& trace, const MetricProfile& profile);

StageOutcome evaluate_trace(const Trace& trace, const MetricProfile& profile);

/// Fraction of the four stages achieved. Throws for a broken stage chain.
double partial_success(const StageOutcome& outcome);

struct EpisodeResult {
  std::string episode_id;
  StageOutcome outcome;
  bool overall = false;
  double partial = 0.0;
  int total_steps = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string failure_reason;  // empty when the episode ran to completion
  friend bool operator==(const EpisodeResult&, const EpisodeResult&) = default;
};

EpisodeResult make_result(std::string episode_id, const StageOutcome& outcome, int total_steps);

Json result_to_json(const EpisodeResult& r);
/// Per-step trace records; infinite distances are written as null.
Json trace_to_json(const Trace& trace);
EpisodeResult result_from_json(const Json& j);

struct SummaryTable {
  std::size_t episodes = 0;
  std::array<double, kStageCount> stage_rate{};
  double overall = 0.0;
  double partial = 0.0;
  std::array<double, kStageCount> mean_steps{};     // over episodes whose stage succeeded
  std::array<double, kStageCount> attempt_rate{};   // episodes that reached the stage
  double mean_total_steps = 0.0;
};

SummaryTable aggregate(std::span<const EpisodeResult> results);
Json summary_to_json(const SummaryTable& s);

/// Stage success rows (percentages, one decimal) plus step and attempt columns.
std::string format_summary(std::span<const std::pair<std::string, SummaryTable>> rows);

// ---- Rewards ---------------------------------------------------------------

struct RewardParams {
  struct Find {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 0.3;
    double d_close = 3.0;
    bool literal_collision_sign = false;  // +gamma on collision, as printed
  } find;
  struct Gaze {
    double alpha = 2.0;
    double beta = 1.0;
    double gamma = 0.8;
    double success_bonus = 2.0;
    double wrong_object_penalty = -0.5;
  } gaze;
  struct Place {
    double release_contact = 5.0;
    double contact_per_step = 1.0;
    double failed_release = -1.0;
  } place;
  double slack = -0.005;
};

struct RewardState {
  double d = 0.0;
  double theta = 0.0;
  bool did_collide = false;
};

double reward_find_x(const RewardState& prev, const RewardState& cur, const RewardParams& p = {});

struct GazeEvent {
  bool success = false;
  bool wrong_object = false;  // a new, distinct non-target object is centered
};
double reward_gaze(const RewardState& prev, const RewardState& cur, const RewardParams& p = {},
                   GazeEvent event = {});

/// Applies the wrong-object penalty once per distinct object id.
class GazeRewardTracker {
 public:
  explicit GazeRewardTracker(RewardParams params = {}) : params_(params) {}
  double step(const RewardState& prev, const RewardState& cur, bool success,
              std::optional<std::string> centered_non_target);

 private:
  RewardParams params_;
  std::set<std::string> penalized_;
};

struct PlaceEvent {
  bool released = false;
  bool contact = false;  // object rests on the goal receptacle
};
double reward_place(const PlaceEvent& event, const RewardParams& p = {});

}  // namespace ovmm
