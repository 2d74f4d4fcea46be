#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ovmm/agent.hpp"
#include "ovmm/evaluation.hpp"
#include "ovmm/protocol.hpp"

namespace ovmm {

struct AgentSpec {
  enum class Kind { Builtin, Exec, Tcp };
  Kind kind = Kind::Builtin;
  std::string target;

  /// "builtin", "exec:<shell command>" or "tcp:<host>:<port>".
  static AgentSpec parse(std::string_view text);
  std::string to_string() const;
};

struct RunConfig {
  std::filesystem::path episodes;  // directory of episode files, or a single file
  std::filesystem::path scenes;    // directory of <scene_id>.json; empty means a sibling 'scenes' directory
  AgentSpec agent;
  PerceptionNoiseProfile noise;
  MetricProfile profile;
  ActionSpace action_space = ActionSpace::Discrete;
  std::uint64_t global_seed = 0;
  int parallelism = 1;
  std::filesystem::path output;
  std::chrono::milliseconds agent_timeout = std::chrono::seconds(30);

  void validate() const;
};

struct Dataset {
  std::map<std::string, Scene> scenes;
  std::vector<Episode> episodes;  // sorted by id
};

Dataset load_dataset(const std::filesystem::path& episodes, const std::filesystem::path& scenes);

/// Episodes are sorted by id; ids must be unique and every scene present.
Dataset make_dataset(std::vector<Scene> scenes, std::vector<Episode> episodes);

/// Digest of everything that determines the scores: dataset contents,
/// perception, metric profile, action space and global seed. The agent
/// transport and the parallelism are deliberately left out.
std::string config_hash(const RunConfig& config, const Dataset& data);

std::unique_ptr<Agent> make_agent(const RunConfig& config, const SimConfig& sim);

struct BatchResult {
  std::vector<EpisodeResult> results;  // sorted by episode id
  SummaryTable summary;
  std::string config_hash;
};

/// Runs every episode once (OpenMP over episodes) and writes the JSONL
/// results file when `config.output` is set.
BatchResult run_batch(const RunConfig& config, const Dataset& data);
BatchResult run_batch(const RunConfig& config);

std::string results_to_jsonl(std::span<const EpisodeResult> results);
std::vector<EpisodeResult> load_results(const std::filesystem::path& path);

/// One summary row per results file, ordered by file name.
std::string report(std::span<const std::filesystem::path> files);

}  // namespace ovmm
