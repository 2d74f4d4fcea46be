#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "ovmm/harness.hpp"
#include "ovmm/io.hpp"
#include "ovmm/protocol.hpp"
#include "ovmm/semantic_map.hpp"

namespace fs = std::filesystem;
using namespace ovmm;

namespace {

void configure_logging() {
  spdlog::set_default_logger(spdlog::stderr_logger_mt("ovmm"));
  spdlog::set_pattern("[%l] %v");
  const char* level = std::getenv("OVMM_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
}

ActionSpace parse_action_space(const std::string& s) {
  if (s == "discrete") return ActionSpace::Discrete;
  if (s == "continuous") return ActionSpace::Continuous;
  throw Error(fmt::format("unknown action space '{}'", s));
}

struct GenScenesArgs {
  int count = 1;
  std::uint64_t seed = 0;
  fs::path out;
  int rooms = 0;  // 0 draws 1-3 per scene
  int receptacles = 0;  // 0 means three per room
};

int gen_scenes(const GenScenesArgs& a) {
  fs::create_directories(a.out);
  for (int i = 0; i < a.count; ++i) {
    const std::uint64_t seed = derive_seed(a.seed, fmt::format("scene/{}", i));
    SceneGenParams p;
    p.rooms = a.rooms > 0 ? a.rooms : 1 + static_cast<int>(seed % 3);
    p.receptacles = a.receptacles > 0 ? a.receptacles : 3 * p.rooms;
    p.width = 3.0 + 3.0 * p.rooms;
    const std::string id = fmt::format("scene_{:04}", i);
    const Scene scene = generate_scene(seed, p, id);
    save_scene(scene, a.out / (id + ".json"));
    spdlog::info("wrote {} ({} rooms, {} receptacles)", id, scene.rooms.size(), scene.receptacles.size());
  }
  return 0;
}

struct GenEpisodesArgs {
  fs::path scenes;
  std::string phase = "train";
  int count = 1;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  fs::path out;
};

int gen_episodes(const GenEpisodesArgs& a) {
  std::vector<Scene> scenes;
  for (const auto& entry : fs::directory_iterator(a.scenes)) {
    if (entry.path().extension() == ".json") scenes.push_back(load_scene(entry.path()));
  }
  if (scenes.empty()) throw Error(fmt::format("no scene files in {}", a.scenes.string()));
  std::sort(scenes.begin(), scenes.end(), [](const Scene& x, const Scene& y) { return x.id < y.id; });
  const Phase phase = phase_from_string(a.phase);
  const ObjectCatalog& catalog = default_object_catalog();
  const SplitAssignment splits = assign_splits(catalog.categories, catalog.templates, a.split_seed);
  fs::create_directories(a.out);
  for (int i = 0; i < a.count; ++i) {
    const Scene& scene = scenes[static_cast<std::size_t>(i) % scenes.size()];
    const std::string id = fmt::format("{}_{:05}", to_string(phase), i);
    const Episode ep = generate_episode(scene, catalog, splits, phase,
                                        derive_seed(a.seed, fmt::format("episode/{}", i)), id);
    save_episode(ep, a.out / (id + ".json"));
    spdlog::info("wrote {} in {}: {} from {} to {}", id, scene.id, ep.object_category,
                 ep.start_receptacle_category, ep.goal_receptacle_category);
  }
  return 0;
}

struct RunArgs {
  fs::path episodes;
  fs::path scenes;
  std::string agent = "builtin";
  std::string perception = "gt";
  double dropout = 0.5;
  double misclassify = 0.2;
  std::string profile = "sim";
  std::string action_space = "discrete";
  std::uint64_t seed = 0;
  int parallelism = 1;
  fs::path out = "results.jsonl";
  int timeout_ms = 30000;
};

int run(const RunArgs& a) {
  RunConfig cfg;
  cfg.episodes = a.episodes;
  cfg.scenes = a.scenes;
  cfg.agent = AgentSpec::parse(a.agent);
  if (a.perception == "gt") {
    cfg.noise = PerceptionNoiseProfile::ground_truth();
  } else if (a.perception == "noisy") {
    cfg.noise = {a.dropout, a.misclassify};
  } else {
    throw Error(fmt::format("unknown perception preset '{}'", a.perception));
  }
  cfg.profile = MetricProfile::from_name(a.profile);
  cfg.action_space = parse_action_space(a.action_space);
  cfg.global_seed = a.seed;
  cfg.parallelism = a.parallelism;
  cfg.output = a.out;
  cfg.agent_timeout = std::chrono::milliseconds(a.timeout_ms);
  const BatchResult batch = run_batch(cfg);
  const std::pair<std::string, SummaryTable> row{a.out.stem().string(), batch.summary};
  fmt::print("{}", format_summary(std::span(&row, 1)));
  fmt::print("wrote {} results to {} (config {})\n", batch.results.size(), a.out.string(), batch.config_hash);
  return 0;
}

struct DumpArgs {
  fs::path episode;
  fs::path scenes;
  fs::path out = "debug";
  std::string perception = "gt";
  std::uint64_t seed = 0;
  int every = 10;
};

void write_depth_pgm(const Frame& f, double max_range, const fs::path& path) {
  std::string out = fmt::format("P5\n{} {}\n255\n", f.width, f.height);
  for (float d : f.depth) {
    const double v = d == kInvalidDepth ? 0.0 : 255.0 * (1.0 - std::min(1.0, d / max_range));
    out.push_back(static_cast<char>(static_cast<int>(v)));
  }
  write_text_file(path, out);
}

void write_semantic_pgm(const Frame& f, const fs::path& path) {
  std::string out = fmt::format("P5\n{} {}\n255\n", f.width, f.height);
  for (InstanceId id : f.semantic) out.push_back(static_cast<char>(id == 0 ? 0 : 40 + (id * 37) % 215));
  write_text_file(path, out);
}

int dump_debug(const DumpArgs& a) {
  const Episode ep = load_episode(a.episode);
  const fs::path scene_dir = a.scenes.empty() ? a.episode.parent_path().parent_path() / "scenes" : a.scenes;
  const Scene scene = load_scene(scene_dir / (ep.scene_id + ".json"));
  SimConfig sim;
  if (a.perception == "noisy") sim.noise = PerceptionNoiseProfile::noisy();
  AgentConfig acfg;
  acfg.camera = sim.camera;
  HeuristicAgent agent(acfg);
  fs::create_directories(a.out);
  const std::uint64_t seed = derive_seed(a.seed, ep.id);
  const char* channel_names[] = {"object", "start_receptacle", "goal_receptacle", "obstacle",
                                 "explored", "current", "past"};
  Json log = Json::array();
  const EpisodeRun run = run_episode(
      scene, ep, agent, sim, MetricProfile::sim(), seed,
      [&](const Observation& obs, const Action& action, const Simulator&) {
        log.push_back({{"step", obs.step},
                       {"phase", to_string(agent.phase())},
                       {"action", action_to_json(action)},
                       {"rule", agent.last_decision() ? to_string(agent.last_decision()->rule) : ""}});
        if (a.every <= 0 || obs.step % a.every != 0) return;
        const fs::path dir = a.out / fmt::format("step_{:04}", obs.step);
        fs::create_directories(dir);
        for (int k = 0; k < agent.map().channel_count(); ++k) {
          write_pgm(agent.map().channel(k), dir / fmt::format("map_{}.pgm", channel_names[k]));
        }
        write_depth_pgm(obs.frame, sim.camera.max_range, dir / "depth.pgm");
        write_semantic_pgm(obs.frame, dir / "semantic.pgm");
      });
  write_text_file(a.out / "trace.json", trace_to_json(run.trace).dump(1));
  write_text_file(a.out / "agent_log.json", log.dump(1));
  write_text_file(a.out / "result.json", result_to_json(run.result).dump(1));
  fmt::print("{}: overall={} partial={:.2f} steps={} {}\n", ep.id, run.result.overall, run.result.partial,
             run.result.total_steps, run.result.failure_reason);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Open-vocabulary mobile manipulation simulator and evaluation harness"};
  app.require_subcommand(1);

  GenScenesArgs gs;
  auto* c_gs = app.add_subcommand("gen-scenes", "Generate procedural apartment scenes");
  c_gs->add_option("--count", gs.count, "Number of scenes")->check(CLI::PositiveNumber);
  c_gs->add_option("--seed", gs.seed, "Base seed");
  c_gs->add_option("--out", gs.out, "Output directory")->required();
  c_gs->add_option("--rooms", gs.rooms, "Rooms per scene (0 draws 1-3)")->check(CLI::Range(0, 5));
  c_gs->add_option("--receptacles", gs.receptacles, "Receptacles per scene (0: three per room)")->check(CLI::NonNegativeNumber);

  GenEpisodesArgs ge;
  auto* c_ge = app.add_subcommand("gen-episodes", "Generate episodes over a scene directory");
  c_ge->add_option("--scenes", ge.scenes, "Scene directory")->required()->check(CLI::ExistingDirectory);
  c_ge->add_option("--phase", ge.phase, "train, val-scui or val-ucui")
      ->check(CLI::IsMember({"train", "val-scui", "val-ucui", "val_sc_ui", "val_uc_ui"}));
  c_ge->add_option("--count", ge.count, "Number of episodes")->check(CLI::PositiveNumber);
  c_ge->add_option("--seed", ge.seed, "Base seed");
  c_ge->add_option("--split-seed", ge.split_seed, "Seed of the seen/unseen split assignment");
  c_ge->add_option("--out", ge.out, "Output directory")->required();

  RunArgs ra;
  auto* c_run = app.add_subcommand("run", "Evaluate an agent on a set of episodes");
  c_run->add_option("--episodes", ra.episodes, "Episode directory or file")->required()->check(CLI::ExistingPath);
  c_run->add_option("--scenes", ra.scenes, "Scene directory (default: a 'scenes' directory beside the episode directory)");
  c_run->add_option("--agent", ra.agent, "builtin, exec:<command> or tcp:<host>:<port>");
  c_run->add_option("--perception", ra.perception, "gt or noisy")->check(CLI::IsMember({"gt", "noisy"}));
  c_run->add_option("--dropout", ra.dropout, "Noisy preset: per-instance dropout probability");
  c_run->add_option("--misclassify", ra.misclassify, "Noisy preset: misclassification probability");
  c_run->add_option("--profile", ra.profile, "Metric profile: sim or real")->check(CLI::IsMember({"sim", "real"}));
  c_run->add_option("--action-space", ra.action_space, "discrete or continuous")
      ->check(CLI::IsMember({"discrete", "continuous"}));
  c_run->add_option("--seed", ra.seed, "Global seed");
  c_run->add_option("--parallelism", ra.parallelism, "Concurrent episodes")->check(CLI::PositiveNumber);
  c_run->add_option("--out", ra.out, "Results JSONL path");
  c_run->add_option("--timeout-ms", ra.timeout_ms, "Per-message timeout for external agents")
      ->check(CLI::PositiveNumber);

  std::vector<fs::path> report_files;
  auto* c_rep = app.add_subcommand("report", "Summarise results files as a table");
  c_rep->add_option("files", report_files, "Results JSONL files")->required()->check(CLI::ExistingFile);

  DumpArgs da;
  auto* c_dump = app.add_subcommand("dump-debug", "Run the builtin agent on one episode and dump maps and frames");
  c_dump->add_option("--episode", da.episode, "Episode file")->required()->check(CLI::ExistingFile);
  c_dump->add_option("--scenes", da.scenes, "Scene directory (default: a 'scenes' directory beside the episode directory)");
  c_dump->add_option("--out", da.out, "Output directory");
  c_dump->add_option("--perception", da.perception, "gt or noisy")->check(CLI::IsMember({"gt", "noisy"}));
  c_dump->add_option("--seed", da.seed, "Global seed");
  c_dump->add_option("--every", da.every, "Dump images every N steps (0: never)");

  int listen_port = -1;
  auto* c_agent = app.add_subcommand("agent", "Serve the builtin agent over the wire protocol (stdio or TCP)");
  c_agent->add_option("--listen", listen_port, "Serve TCP on 127.0.0.1:PORT instead of stdio");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*c_gs) return gen_scenes(gs);
    if (*c_ge) return gen_episodes(ge);
    if (*c_run) return run(ra);
    if (*c_rep) {
      fmt::print("{}", report(report_files));
      return 0;
    }
    if (*c_dump) return dump_debug(da);
    if (*c_agent) {
      if (listen_port >= 0) {
        serve_agent_tcp(listen_port, AgentConfig{}, 0,
                        [](int port) { spdlog::info("listening on 127.0.0.1:{}", port); });
      } else {
        serve_agent(STDIN_FILENO, STDOUT_FILENO, AgentConfig{});
      }
      return 0;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
