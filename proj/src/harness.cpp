#include "ovmm/harness.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "ovmm/io.hpp"

namespace ovmm {
namespace {

std::vector<std::filesystem::path> json_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

AgentSpec AgentSpec::parse(std::string_view text) {
  if (text == "builtin") return {Kind::Builtin, {}};
  if (text.starts_with("exec:") && text.size() > 5) return {Kind::Exec, std::string(text.substr(5))};
  if (text.starts_with("tcp:") && text.size() > 4) return {Kind::Tcp, std::string(text.substr(4))};
  throw Error(fmt::format("agent spec '{}' must be builtin, exec:<command> or tcp:<host>:<port>", text));
}

std::string AgentSpec::to_string() const {
  switch (kind) {
    case Kind::Builtin:
      return "builtin";
    case Kind::Exec:
      return "exec:" + target;
    case Kind::Tcp:
      return "tcp:" + target;
  }
  return "builtin";
}

void RunConfig::validate() const {
  if (parallelism < 1) throw Error("parallelism must be at least 1");
  noise.validate();
  if (profile.step_limit < 1) throw Error("step limit must be positive");
}

Dataset make_dataset(std::vector<Scene> scenes, std::vector<Episode> episodes) {
  Dataset d;
  for (auto& s : scenes) {
    const std::string id = s.id;
    if (!d.scenes.emplace(id, std::move(s)).second) throw Error(fmt::format("duplicate scene id '{}'", id));
  }
  std::sort(episodes.begin(), episodes.end(), [](const Episode& a, const Episode& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    if (i > 0 && episodes[i].id == episodes[i - 1].id) {
      throw Error(fmt::format("duplicate episode id '{}'", episodes[i].id));
    }
    if (!d.scenes.contains(episodes[i].scene_id)) {
      throw Error(fmt::format("episode '{}' refers to missing scene '{}'", episodes[i].id,
                              episodes[i].scene_id));
    }
  }
  d.episodes = std::move(episodes);
  return d;
}

Dataset load_dataset(const std::filesystem::path& episodes, const std::filesystem::path& scenes) {
  std::vector<Episode> eps;
  if (std::filesystem::is_directory(episodes)) {
    for (const auto& p : json_files(episodes)) eps.push_back(load_episode(p));
  } else {
    eps.push_back(load_episode(episodes));
  }
  if (eps.empty()) throw Error(fmt::format("no episode files in {}", episodes.string()));
  std::filesystem::path scene_dir = scenes;
  if (scene_dir.empty()) {
    // Default layout: <root>/episodes/*.json next to <root>/scenes/*.json.
    const auto ep_dir = std::filesystem::is_directory(episodes) ? episodes : episodes.parent_path();
    scene_dir = ep_dir.parent_path() / "scenes";
  }
  std::set<std::string> needed;
  for (const auto& e : eps) needed.insert(e.scene_id);
  std::vector<Scene> loaded;
  for (const auto& id : needed) {
    const auto path = scene_dir / (id + ".json");
    if (!std::filesystem::exists(path)) throw Error(fmt::format("scene file {} not found", path.string()));
    loaded.push_back(load_scene(path));
  }
  return make_dataset(std::move(loaded), std::move(eps));
}

std::string config_hash(const RunConfig& config, const Dataset& data) {
  Json j;
  for (const auto& [id, scene] : data.scenes) j["scenes"][id] = fnv1a(scene_to_json(scene).dump());
  for (const auto& e : data.episodes) j["episodes"][e.id] = fnv1a(episode_to_json(e).dump());
  j["noise"] = {config.noise.dropout_prob, config.noise.misclassify_prob};
  j["profile"] = config.profile.name;
  j["step_limit"] = config.profile.step_limit;
  j["action_space"] = config.action_space == ActionSpace::Discrete ? "discrete" : "continuous";
  j["global_seed"] = config.global_seed;
  return fmt::format("{:016x}", fnv1a(j.dump()));
}

std::unique_ptr<Agent> make_agent(const RunConfig& config, const SimConfig& sim) {
  switch (config.agent.kind) {
    case AgentSpec::Kind::Builtin: {
      AgentConfig cfg;
      cfg.camera = sim.camera;
      cfg.actions = sim.actions;
      cfg.action_space = config.action_space;
      return std::make_unique<HeuristicAgent>(cfg);
    }
    case AgentSpec::Kind::Exec:
      return std::make_unique<ExternalAgent>(ExternalEndpoint{ExternalEndpoint::Kind::Exec, config.agent.target},
                                             sim.camera, config.action_space, config.agent_timeout);
    case AgentSpec::Kind::Tcp:
      return std::make_unique<ExternalAgent>(ExternalEndpoint{ExternalEndpoint::Kind::Tcp, config.agent.target},
                                             sim.camera, config.action_space, config.agent_timeout);
  }
  throw Error("unknown agent kind");
}

BatchResult run_batch(const RunConfig& config, const Dataset& data) {
  config.validate();
  if (data.episodes.empty()) throw Error("batch has no episodes");
  SimConfig sim;
  sim.noise = config.noise;

  BatchResult out;
  out.config_hash = config_hash(config, data);
  out.results.resize(data.episodes.size());
  const auto n = static_cast<std::int64_t>(data.episodes.size());

#pragma omp parallel for schedule(dynamic, 1) num_threads(config.parallelism)
  for (std::int64_t i = 0; i < n; ++i) {
    const Episode& ep = data.episodes[static_cast<std::size_t>(i)];
    const std::uint64_t seed = derive_seed(config.global_seed, ep.id);
    EpisodeResult r;
    try {
      auto agent = make_agent(config, sim);
      r = run_episode(data.scenes.at(ep.scene_id), ep, *agent, sim, config.profile, seed).result;
    } catch (const std::exception& e) {
      r = make_result(ep.id, StageOutcome{}, 0);
      r.seed = seed;
      r.failure_reason = e.what();
    }
    r.config_hash = out.config_hash;
    spdlog::debug("episode {}: overall={} partial={:.2f} steps={} {}", r.episode_id, r.overall,
                  r.partial, r.total_steps, r.failure_reason);
    out.results[static_cast<std::size_t>(i)] = std::move(r);
  }

  out.summary = aggregate(out.results);
  if (!config.output.empty()) {
    if (config.output.has_parent_path()) std::filesystem::create_directories(config.output.parent_path());
    write_text_file(config.output, results_to_jsonl(out.results));
  }
  return out;
}

BatchResult run_batch(const RunConfig& config) {
  return run_batch(config, load_dataset(config.episodes, config.scenes));
}

std::string results_to_jsonl(std::span<const EpisodeResult> results) {
  std::vector<const EpisodeResult*> sorted;
  for (const auto& r : results) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->episode_id < b->episode_id; });
  std::string out;
  for (const auto* r : sorted) out += result_to_json(*r).dump() + "\n";
  return out;
}

std::vector<EpisodeResult> load_results(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<EpisodeResult> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(fmt::format("results schema mismatch: {}:{} is not JSON", path.string(), line_no));
    }
    out.push_back(result_from_json(j));
  }
  if (out.empty()) throw Error(fmt::format("results file {} is empty", path.string()));
  return out;
}

std::string report(std::span<const std::filesystem::path> files) {
  if (files.empty()) throw Error("report needs at least one results file");
  std::vector<std::filesystem::path> sorted(files.begin(), files.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  std::vector<std::pair<std::string, SummaryTable>> rows;
  for (const auto& f : sorted) {
    const auto results = load_results(f);
    rows.emplace_back(f.stem().string(), aggregate(results));
  }
  return format_summary(rows);
}

}  // namespace ovmm
