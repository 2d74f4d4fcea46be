// Acceptance suite: one PASS/FAIL line per primary criterion, nonzero exit if
// any criterion fails. Takes the path of the ovmm CLI for the proxy check.
#include <CLI11.hpp>
#include <fmt/format.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ovmm/evaluation.hpp"
#include "ovmm/harness.hpp"
#include "ovmm/io.hpp"
#include "ovmm/navigation.hpp"

using namespace ovmm;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::vector<std::string> failures;
  std::string detail;

  void expect(bool ok, std::string what) {
    if (!ok) {
      pass = false;
      failures.push_back(std::move(what));
    }
  }
};

// ---- metric traces -----------------------------------------------------------

constexpr double kFar = std::numeric_limits<double>::infinity();

Trace blank_trace(int n) {
  Trace tr;
  tr.frame_pixels = 160 * 120;
  for (int i = 1; i <= n; ++i) {
    TraceStep t;
    t.step = i;
    t.target_viewpoint_distance = kFar;
    t.goal_viewpoint_distance = kFar;
    t.target_object_distance = kFar;
    t.goal_receptacle_distance = kFar;
    t.grasp_distance = kFar;
    tr.steps.push_back(t);
  }
  return tr;
}

struct TraceSpec {
  int steps = 200;
  double target_vp = 0.05;
  int target_px = 40;
  double grasp_dist = 0.5;
  double goal_vp = 0.05;
  int goal_px = 40;
  int release_step = 60;   // 1-based
  int supported = 10000;   // steps the object stays on the goal after release
};

/// Stages happen at steps 10, 20, 50 and release_step.
Trace build_trace(const TraceSpec& s) {
  Trace tr = blank_trace(s.steps);
  auto at = [&](int step) -> TraceStep& { return tr.steps[static_cast<std::size_t>(step - 1)]; };
  at(10).target_viewpoint_distance = s.target_vp;
  at(10).target_pixels = s.target_px;
  at(20).grasp_attempt = true;
  at(20).grasp_target_visible = true;
  at(20).grasp_distance = s.grasp_dist;
  at(20).grasp_success = s.grasp_dist <= 0.8;
  at(50).goal_viewpoint_distance = s.goal_vp;
  at(50).goal_pixels = s.goal_px;
  if (s.release_step <= s.steps) {
    at(s.release_step).release = true;
    at(s.release_step).released_on_goal = true;
    for (int k = 1; k <= s.supported && s.release_step + k <= s.steps; ++k) {
      at(s.release_step + k).object_on_goal = true;
    }
  }
  return tr;
}

Verdict metric_exactness() {
  Verdict v;
  const MetricProfile p = MetricProfile::sim();
  struct Case {
    std::string name;
    TraceSpec spec;
    std::array<bool, 4> expected;
  };
  std::vector<Case> cases;
  auto add = [&](std::string name, std::function<void(TraceSpec&)> edit, std::array<bool, 4> e) {
    TraceSpec s;
    edit(s);
    cases.push_back({std::move(name), s, e});
  };
  const double above_vp = std::nextafter(0.1, 1.0);
  const double above_pick = std::nextafter(0.8, 1.0);
  add("all stages", [](TraceSpec&) {}, {true, true, true, true});
  add("target viewpoint at 0.1 m", [](TraceSpec& s) { s.target_vp = 0.1; }, {true, true, true, true});
  add("target viewpoint just past 0.1 m", [&](TraceSpec& s) { s.target_vp = above_vp; },
      {false, false, false, false});
  add("target 20 px", [](TraceSpec& s) { s.target_px = 20; }, {true, true, true, true});
  add("target 19 px", [](TraceSpec& s) { s.target_px = 19; }, {false, false, false, false});
  add("grasp at 0.8 m", [](TraceSpec& s) { s.grasp_dist = 0.8; }, {true, true, true, true});
  add("grasp just past 0.8 m", [&](TraceSpec& s) { s.grasp_dist = above_pick; },
      {true, false, false, false});
  add("goal viewpoint at 0.1 m", [](TraceSpec& s) { s.goal_vp = 0.1; }, {true, true, true, true});
  add("goal viewpoint just past 0.1 m", [&](TraceSpec& s) { s.goal_vp = above_vp; },
      {true, true, false, false});
  add("goal 20 px", [](TraceSpec& s) { s.goal_px = 20; }, {true, true, true, true});
  add("goal 19 px", [](TraceSpec& s) { s.goal_px = 19; }, {true, true, false, false});
  add("settle 50 steps", [](TraceSpec& s) { s.supported = 50; }, {true, true, true, true});
  add("settle 49 steps", [](TraceSpec& s) { s.supported = 49; }, {true, true, true, false});
  add("release at 1200 under the cap", [](TraceSpec& s) {
        s.steps = 1250;
        s.release_step = 1200;
      }, {true, true, true, true});
  add("release at 1201 settles past the cap", [](TraceSpec& s) {
        s.steps = 1250;
        s.release_step = 1201;
      }, {true, true, true, false});
  add("steps beyond 1250 are ignored", [](TraceSpec& s) {
        s.steps = 1400;
        s.release_step = 1220;
      }, {true, true, true, false});
  add("release exactly at the cap", [](TraceSpec& s) {
        s.steps = 1250;
        s.release_step = 1250;
      }, {true, true, true, false});

  for (const auto& c : cases) {
    const StageOutcome o = evaluate_trace(build_trace(c.spec), p);
    v.expect(o.flags() == c.expected, c.name);
  }
  // The pixel threshold is a fraction of the frame: 0.001 * 19200 = 19.2.
  v.expect(p.pixel_fraction * 160 * 120 > 19.0 && p.pixel_fraction * 160 * 120 < 20.0, "19.2 px threshold");
  v.detail = fmt::format("{} boundary traces", cases.size());
  return v;
}

// ---- rewards -----------------------------------------------------------------

Verdict reward_exactness() {
  Verdict v;
  struct Eval {
    std::string name;
    double got;
    double expected;
  };
  const RewardParams p;
  std::vector<Eval> evals;
  auto find = [&](std::string n, RewardState a, RewardState b, double e) {
    evals.push_back({std::move(n), reward_find_x(a, b, p), e});
  };
  auto gaze = [&](std::string n, RewardState a, RewardState b, GazeEvent ev, double e) {
    evals.push_back({std::move(n), reward_gaze(a, b, p, ev), e});
  };
  auto place = [&](std::string n, PlaceEvent ev, double e) {
    evals.push_back({std::move(n), reward_place(ev, p), e});
  };

  // 1.0*(5 - 4.5) - 0.005; far from the goal the angle term is off.
  find("find far progress", {5.0, 1.0, false}, {4.5, 0.2, false}, 0.495);
  find("find slack only", {4.0, 1.0, false}, {4.0, 1.0, false}, -0.005);
  // 0.2 + (0.6 - 0.4) - 0.005
  find("find near progress", {2.0, 0.6, false}, {1.8, 0.4, false}, 0.395);
  // -0.1 + 0 - 0.3 - 0.005
  find("find collision", {2.0, 0.5, false}, {2.1, 0.5, true}, -0.405);
  // d = 3 is inside the angle band: 0.5 + 0.5 - 0.005
  find("find at 3 m", {3.5, 1.0, false}, {3.0, 0.5, false}, 0.995);
  // Collision with no motion: -0.3 - 0.005
  find("find collision only", {1.0, 0.0, false}, {1.0, 0.0, true}, -0.305);

  gaze("gaze slack only", {1.5, 0.3, false}, {1.5, 0.3, false}, {}, -0.005);
  // 2*0.3 + cos 0 - 0.005
  gaze("gaze centered", {1.0, 0.5, false}, {0.7, 0.0, false}, {}, 1.595);
  // 2*0.1 + cos(0.1) + 2 - 0.005, cos(0.1) = 0.99500416527802582
  gaze("gaze success", {0.6, 0.2, false}, {0.5, 0.1, false}, {true, false},
       0.2 + 0.99500416527802582 + 2.0 - 0.005);
  // 2*0.2 - 0.5 - 0.005
  gaze("gaze wrong object", {1.2, 0.0, false}, {1.0, 0.0, false}, {false, true}, -0.105);
  // Exactly 0.8 m: 0 + cos(pi/3) - 0.005
  gaze("gaze at 0.8 m", {0.8, 1.0, false}, {0.8, std::acos(0.5), false}, {}, 0.495);

  place("place release with contact", {true, true}, 4.995);
  place("place failed release", {true, false}, -1.005);
  place("place contact without release", {false, true}, 0.995);
  place("place slack only", {false, false}, -0.005);

  GazeRewardTracker tracker;
  const double first = tracker.step({1.0, 0.0, false}, {1.0, 0.0, false}, false, "cup_2");
  const double again = tracker.step({1.0, 0.0, false}, {1.0, 0.0, false}, false, "cup_2");
  evals.push_back({"gaze penalty first time", first, -0.505});
  evals.push_back({"gaze penalty not repeated", again, -0.005});

  for (const auto& e : evals) {
    v.expect(std::abs(e.got - e.expected) <= 1e-9, fmt::format("{} ({} vs {})", e.name, e.got, e.expected));
  }
  bool threw = false;
  try {
    reward_find_x({-1.0, 0.0, false}, {1.0, 0.0, false}, p);
  } catch (const Error&) {
    threw = true;
  }
  v.expect(threw, "negative distance rejected");
  v.detail = fmt::format("{} hand-derived evaluations", evals.size());
  return v;
}

// ---- fast marching -----------------------------------------------------------

struct FmmTally {
  int grids = 0;
  double seconds = 0.0;
  double worst = 0.0;
  int below_euclid = 0;  // cells where the field dips under the straight-line distance
};

/// Checks 100 seeded grids with `goal_count` goals each against the sweeping
/// oracle and the BFS upper bound. The Euclidean lower bound is enforced when
/// `strict_lower` is set and otherwise only counted.
FmmTally check_fmm_grids(Verdict& v, int goal_count, bool strict_lower) {
  const double h = kCellSize;
  FmmTally t;
  for (std::uint64_t seed = 0; t.grids < 100; ++seed) {
    Rng rng(derive_seed(2024, fmt::format("fmm/{}/{}", goal_count, seed)));
    BinaryGrid g(32, 32, 1);
    for (auto& c : g.raw()) c = rng.bernoulli(0.3) ? 0 : 1;
    std::vector<Cell> goals;
    for (int tries = 0; tries < 100 && static_cast<int>(goals.size()) < goal_count; ++tries) {
      const Cell c{static_cast<int>(rng.uniform_int(0, 31)), static_cast<int>(rng.uniform_int(0, 31))};
      if (g[c] && std::find(goals.begin(), goals.end(), c) == goals.end()) goals.push_back(c);
    }
    if (static_cast<int>(goals.size()) < goal_count) continue;
    ++t.grids;
    const auto t0 = Clock::now();
    const DistanceField f = fmm_distance_field(g, goals, h);
    t.seconds += seconds_since(t0);

    const Grid<double> sweep = testing::sweeping_eikonal(g, goals, h);
    const Grid<int> hops = testing::bfs_oracle(g, goals);
    const Grid<double> straight = testing::euclidean_to_goals(32, 32, goals, h);
    for (int r = 0; r < 32; ++r) {
      for (int c = 0; c < 32; ++c) {
        const double d = f.values(r, c);
        if (hops(r, c) < 0) {
          if (d != kUnreachable || sweep(r, c) != kUnreachable) {
            v.expect(false, fmt::format("{} goal(s), grid {} cell ({},{}) should be unreachable", goal_count,
                                        seed, r, c));
          }
          continue;
        }
        t.worst = std::max(t.worst, std::abs(d - sweep(r, c)));
        if (std::abs(d - sweep(r, c)) > 1e-6) {
          v.expect(false, fmt::format("{} goal(s), grid {} cell ({},{}) fmm {} vs sweep {}", goal_count, seed,
                                      r, c, d, sweep(r, c)));
        }
        if (d > hops(r, c) * h + 1e-12) {
          v.expect(false, fmt::format("{} goal(s), grid {} cell ({},{}) {} above BFS {}", goal_count, seed, r,
                                      c, d, hops(r, c) * h));
        }
        if (d < straight(r, c) - 1e-12) {
          ++t.below_euclid;
          if (strict_lower) {
            v.expect(false, fmt::format("{} goal(s), grid {} cell ({},{}) {} below Euclidean {}", goal_count,
                                        seed, r, c, d, straight(r, c)));
          }
        }
      }
    }
  }
  return t;
}

Verdict fmm_oracle() {
  Verdict v;
  const FmmTally single = check_fmm_grids(v, 1, true);
  // Where two fronts meet, the upwind update mixes values from different
  // goals and the discrete field can sit slightly under the nearest-goal
  // straight-line distance. The oracle agrees there, so those cells are
  // reported rather than failed.
  const FmmTally multi = check_fmm_grids(v, 3, false);
  const double seconds = single.seconds + multi.seconds;
  v.expect(single.seconds < 5.0, fmt::format("fmm took {:.3f} s", single.seconds));
  v.detail = fmt::format(
      "{} single-goal grids: max |fmm - sweep| = {:.2e}, fmm time {:.3f} s; {} three-goal grids: max "
      "|fmm - sweep| = {:.2e}, {} cells under Euclidean at front junctions; total fmm {:.3f} s",
      single.grids, single.worst, single.seconds, multi.grids, multi.worst, multi.below_euclid, seconds);
  if (v.failures.size() > 10) v.failures.resize(10);
  return v;
}

// ---- episode suites ------------------------------------------------------------

Verdict trivial_suite() {
  Verdict v;
  const Dataset data = testing::trivial_suite();
  RunConfig cfg;
  cfg.global_seed = 1;
  const auto t0 = Clock::now();
  const BatchResult out = run_batch(cfg, data);
  const double secs = seconds_since(t0);
  int ok = 0;
  int worst = 0;
  for (const auto& r : out.results) {
    ok += r.overall;
    worst = std::max(worst, r.total_steps);
    v.expect(r.overall, fmt::format("{} failed ({})", r.episode_id, r.failure_reason));
    v.expect(r.total_steps < 300, fmt::format("{} took {} steps", r.episode_id, r.total_steps));
  }
  v.expect(out.results.size() == 5, "suite has 5 episodes");
  v.expect(secs < 60.0, fmt::format("suite took {:.1f} s", secs));
  v.detail = fmt::format("{}/{} overall, max {} steps, {:.1f} s", ok, out.results.size(), worst, secs);
  return v;
}

Verdict perception_degradation() {
  Verdict v;
  const Dataset data = testing::generated_suite(50, 7);
  RunConfig gt;
  gt.global_seed = 3;
  RunConfig noisy = gt;
  noisy.noise = PerceptionNoiseProfile::noisy();
  const SummaryTable a = run_batch(gt, data).summary;
  const SummaryTable b = run_batch(noisy, data).summary;
  for (const auto* s : {&a, &b}) {
    const bool chain = s->stage_rate[0] >= s->stage_rate[1] && s->stage_rate[1] >= s->stage_rate[2] &&
                       s->stage_rate[2] >= s->overall;
    v.expect(chain, s == &a ? "GT stage ordering" : "noisy stage ordering");
  }
  v.expect(b.overall < a.overall, "noisy overall is not below GT");
  auto row = [](const SummaryTable& s) {
    return fmt::format("{:.0f}/{:.0f}/{:.0f}/{:.0f}", 100 * s.stage_rate[0], 100 * s.stage_rate[1],
                       100 * s.stage_rate[2], 100 * s.overall);
  };
  v.detail = fmt::format("GT {} vs noisy {} (FindObj/Pick/FindRec/Overall %)", row(a), row(b));
  return v;
}

// ---- splits --------------------------------------------------------------------

Verdict split_proportions() {
  Verdict v;
  const std::uint64_t seed = 11;
  const auto [cats, templates] = testing::table3_catalog(seed);
  const SplitAssignment s = assign_splits(cats, templates, seed);
  std::size_t train = 0;
  std::size_t scui = 0;
  std::size_t ucui = 0;
  std::set<std::string> scui_categories;
  for (const auto& t : templates) {
    if (!s.seen_categories.contains(t.category)) {
      ++ucui;
    } else if (s.instance_seen(t)) {
      ++train;
    } else {
      ++scui;
      scui_categories.insert(t.category);
    }
  }
  const auto seen = s.seen_categories.size();
  const auto unseen = s.unseen_categories.size();
  v.expect(cats.size() == 129 && templates.size() == 2535, "catalog is 129 / 2,535");
  v.expect(train == 1363 && scui == 748 && ucui == 424,
           fmt::format("instances {}/{}/{}", train, scui, ucui));
  v.expect(seen >= 84 && seen <= 86, fmt::format("seen categories {} not within 85 +- 1", seen));
  v.expect(unseen <= 45 && unseen >= 43, fmt::format("unseen categories {} not within 44 +- 1", unseen));
  // Every seen category keeps at least one unseen instance under the floor
  // rule, so the SC/UI category count equals the seen count, not 64.
  v.expect(scui_categories.size() == seen, "SC/UI categories differ from the floor-rule prediction");
  v.detail = fmt::format(
      "categories {}/{}/{} (targets 85/64/44; 86/43 is the floor-rule +-1, SC/UI {} vs 64 is a "
      "documented difference), instances {}/{}/{}",
      seen, scui_categories.size(), unseen, scui_categories.size(), train, scui, ucui);
  return v;
}

// ---- grasp and placement ---------------------------------------------------------

Verdict grasp_place_properties() {
  Verdict v;
  int grasp_ok = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PointCloud cloud = testing::box_cloud(1000 + seed);
    const auto fast = score_grasps(cloud);
    const auto brute = testing::brute_force_grasp(cloud, {}, {});
    if (fast.empty() || !brute.found) {
      v.expect(false, fmt::format("box {} has no candidate (fast {}, brute {})", seed, fast.size(), brute.found));
      continue;
    }
    const testing::GraspKey key{fast.front().voxel.col, fast.front().voxel.row, fast.front().yaw == 0.0 ? 0 : 1};
    const bool same = std::abs(fast.front().score - brute.score) <= 1e-12 &&
                      std::find(brute.argmax.begin(), brute.argmax.end(), key) != brute.argmax.end();
    v.expect(same, fmt::format("box {} argmax differs", seed));
    grasp_ok += same;
  }
  int place_ok = 0;
  double worst_ratio = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PointCloud cloud = testing::tabletop_cloud(2000 + seed);
    const auto counts = testing::exhaustive_neighbors(cloud, {});
    const int best = *std::max_element(counts.begin(), counts.end());
    const auto est = estimate_placement_point(cloud, seed);
    const double ratio = static_cast<double>(est.neighbors) / best;
    worst_ratio = std::min(worst_ratio, ratio);
    const bool ok = est.neighbors == counts[est.index] && ratio >= 0.9;
    v.expect(ok, fmt::format("tabletop {} reaches {:.3f} of the best", seed, ratio));
    place_ok += ok;
  }
  v.detail = fmt::format("grasp argmax {}/20, placement {}/20 (worst ratio {:.3f})", grasp_ok, place_ok,
                         worst_ratio);
  return v;
}

// ---- determinism ---------------------------------------------------------------

Verdict determinism(const std::string& cli) {
  Verdict v;
  const fs::path dir = fs::temp_directory_path() / fmt::format("ovmm_acceptance_{}", ::getpid());
  fs::remove_all(dir);
  fs::create_directories(dir);
  const Dataset data = testing::trivial_suite();
  RunConfig cfg;
  cfg.global_seed = 5;
  cfg.output = dir / "first.jsonl";
  run_batch(cfg, data);
  cfg.output = dir / "second.jsonl";
  run_batch(cfg, data);
  const std::string first = read_text_file(dir / "first.jsonl");
  v.expect(first == read_text_file(dir / "second.jsonl"), "two in-process runs differ");

  cfg.agent = AgentSpec::parse(fmt::format("exec:{} agent", cli));
  cfg.output = dir / "proxy.jsonl";
  run_batch(cfg, data);
  const std::string proxy = read_text_file(dir / "proxy.jsonl");
  v.expect(proxy == first, "echo proxy differs from in-process");
  v.detail = fmt::format("{} bytes, in-process x2 and exec proxy compared", first.size());
  fs::remove_all(dir);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string cli;
  app.add_option("--cli", cli, "Path of the ovmm executable used for the proxy check")->required();
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {"metric exactness", metric_exactness},
      {"reward exactness", reward_exactness},
      {"fmm oracle", fmm_oracle},
      {"trivial suite", trivial_suite},
      {"perception degradation", perception_degradation},
      {"split proportions", split_proportions},
      {"grasp/place properties", grasp_place_properties},
      {"determinism", [&] { return determinism(cli); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = criteria[i].run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.failures.push_back(fmt::format("exception: {}", e.what()));
    }
    failed += !v.pass;
    fmt::print("{} [{}] {}: {} ({:.1f} s)\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, v.detail,
               seconds_since(t0));
    for (const auto& f : v.failures) fmt::print("    - {}\n", f);
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
