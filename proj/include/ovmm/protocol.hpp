#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ovmm/agent.hpp"

namespace ovmm {

using Json = nlohmann::json;

// Payload codecs: standard base64 (with padding) of little-endian row-major arrays.
std::string encode_f32le(std::span<const float> values);
std::vector<float> decode_f32le(std::string_view b64, std::size_t count);
std::string encode_u16le(std::span<const std::uint16_t> values);
std::vector<std::uint16_t> decode_u16le(std::string_view b64, std::size_t count);

/// Everything an agent learns at the start of an episode.
struct ResetMessage {
  std::string episode_id;
  GoalSpec goal;
  std::uint64_t seed = 0;
  CameraModel camera;
  ActionSpace action_space = ActionSpace::Discrete;
  friend bool operator==(const ResetMessage&, const ResetMessage&) = default;
};

Json reset_to_json(const ResetMessage& m);
ResetMessage reset_from_json(const Json& j);

Json observation_to_json(const Observation& obs);
/// `goal` is not on the wire per step; it comes from the reset message.
Observation observation_from_json(const Json& j, const GoalSpec& goal);

Json action_to_json(const Action& a);
Action action_from_json(const Json& j);

Json result_message(const EpisodeResult& r);

/// Parses one line and checks its "type" field.
Json parse_message(std::string_view line, std::string_view expected_type);

/// Newline-framed byte stream over a pair of file descriptors.
class LineChannel {
 public:
  LineChannel(int read_fd, int write_fd, std::chrono::milliseconds timeout);
  ~LineChannel();
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;

  void send(const Json& message);
  /// Next line, throwing ProtocolError on timeout or end of stream.
  std::string receive();
  void close_write();

 private:
  int read_fd_;
  int write_fd_;
  std::chrono::milliseconds timeout_;
  std::string buffer_;
};

/// Where an external agent lives.
struct ExternalEndpoint {
  enum class Kind { Exec, Tcp };
  Kind kind = Kind::Exec;
  std::string target;  // shell command, or host:port
};

/// Agent running in another process; one connection (or child) per episode.
class ExternalAgent final : public Agent {
 public:
  ExternalAgent(ExternalEndpoint endpoint, CameraModel camera, ActionSpace space,
                std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~ExternalAgent() override;

  void reset(const std::string& episode_id, const GoalSpec& goal, std::uint64_t seed) override;
  Action act(const Observation& obs) override;
  void finish(const EpisodeResult& result) override;
  /// Last reason the remote agent reported in an action's optional "failure" field.
  std::string failure() const override { return failure_; }

 private:
  void shutdown();

  ExternalEndpoint endpoint_;
  CameraModel camera_;
  ActionSpace space_;
  std::chrono::milliseconds timeout_;
  std::optional<LineChannel> channel_;
  int child_ = -1;
  std::string failure_;
};

/// Serves one agent session on the given streams: reset, then observations
/// answered by actions until the result message or end of input. Used by the
/// `agent` subcommand to expose the builtin heuristic over the wire.
void serve_agent(int read_fd, int write_fd, const AgentConfig& base_config);

/// Listens on 127.0.0.1:`port` (0 picks a free port, reported through
/// `on_listening`) and serves connections one after another. Stops after
/// `max_sessions` connections when positive.
void serve_agent_tcp(int port, const AgentConfig& base_config, int max_sessions = 0,
                     const std::function<void(int)>& on_listening = {});

}  // namespace ovmm
