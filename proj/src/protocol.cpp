#include "ovmm/protocol.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <arpa/inet.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sodium.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <mutex>

extern char** environ;

namespace ovmm {
namespace {

static_assert(std::endian::native == std::endian::little, "payload codecs assume a little-endian host");

std::string to_base64(const void* data, std::size_t bytes) {
  std::string out(sodium_base64_ENCODED_LEN(bytes, sodium_base64_VARIANT_ORIGINAL), '\0');
  sodium_bin2base64(out.data(), out.size(), static_cast<const unsigned char*>(data), bytes,
                    sodium_base64_VARIANT_ORIGINAL);
  out.resize(out.size() - 1);  // trailing NUL
  return out;
}

void from_base64(std::string_view b64, void* out, std::size_t bytes, const char* what) {
  std::size_t written = 0;
  const char* end = nullptr;
  if (sodium_base642bin(static_cast<unsigned char*>(out), bytes, b64.data(), b64.size(), nullptr,
                        &written, &end, sodium_base64_VARIANT_ORIGINAL) != 0 ||
      end != b64.data() + b64.size() || written != bytes) {
    throw ProtocolError(fmt::format("{} payload: expected {} bytes of base64 data", what, bytes));
  }
}

std::string mode_name(RobotMode m) { return m == RobotMode::Navigation ? "navigation" : "manipulation"; }

RobotMode mode_from(const std::string& s) {
  if (s == "navigation") return RobotMode::Navigation;
  if (s == "manipulation") return RobotMode::Manipulation;
  throw ProtocolError(fmt::format("unknown robot mode '{}'", s));
}

Json joints_to_json(const Joints& j) {
  return {{"lift", j.lift},           {"arm_extension", j.arm_extension},
          {"head_pan", j.head_pan},   {"head_tilt", j.head_tilt},
          {"wrist_yaw", j.wrist_yaw}, {"wrist_pitch", j.wrist_pitch},
          {"wrist_roll", j.wrist_roll}, {"gripper", j.gripper}};
}

Joints joints_from_json(const Json& j) {
  Joints out;
  out.lift = j.at("lift").get<double>();
  out.arm_extension = j.at("arm_extension").get<double>();
  out.head_pan = j.at("head_pan").get<double>();
  out.head_tilt = j.at("head_tilt").get<double>();
  out.wrist_yaw = j.at("wrist_yaw").get<double>();
  out.wrist_pitch = j.at("wrist_pitch").get<double>();
  out.wrist_roll = j.at("wrist_roll").get<double>();
  out.gripper = j.at("gripper").get<double>();
  return out;
}

// Decoding helpers turn library exceptions into protocol errors.
template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const ProtocolError&) {
    throw;
  } catch (const std::exception& e) {
    throw ProtocolError(fmt::format("bad {} message: {}", what, e.what()));
  }
}

void ensure_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw Error("libsodium initialisation failed");
    // A vanished agent must surface as EPIPE, not kill the harness.
    ::signal(SIGPIPE, SIG_IGN);
  });
}

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(fmt::format("write to agent failed: {}", std::strerror(errno)));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

int connect_tcp(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) throw Error(fmt::format("tcp address '{}' lacks a port", address));
  const std::string host = address.substr(0, colon);
  const std::string port = address.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw ProtocolError(fmt::format("cannot resolve {}: {}", address, gai_strerror(rc)));
  }
  int fd = -1;
  for (addrinfo* p = res; p && fd < 0; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype | SOCK_CLOEXEC, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) != 0) {
      ::close(fd);
      fd = -1;
    }
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw ProtocolError(fmt::format("cannot connect to {}", address));
  return fd;
}

}  // namespace

std::string encode_f32le(std::span<const float> values) {
  ensure_sodium();
  return to_base64(values.data(), values.size_bytes());
}

std::vector<float> decode_f32le(std::string_view b64, std::size_t count) {
  ensure_sodium();
  std::vector<float> out(count);
  from_base64(b64, out.data(), count * sizeof(float), "depth");
  return out;
}

std::string encode_u16le(std::span<const std::uint16_t> values) {
  ensure_sodium();
  return to_base64(values.data(), values.size_bytes());
}

std::vector<std::uint16_t> decode_u16le(std::string_view b64, std::size_t count) {
  ensure_sodium();
  std::vector<std::uint16_t> out(count);
  from_base64(b64, out.data(), count * sizeof(std::uint16_t), "semantic");
  return out;
}

Json reset_to_json(const ResetMessage& m) {
  return {{"type", "reset"},
          {"episode", m.episode_id},
          {"goal_spec",
           {{"object", m.goal.object_category},
            {"start_receptacle", m.goal.start_receptacle_category},
            {"goal_receptacle", m.goal.goal_receptacle_category}}},
          {"config",
           {{"seed", m.seed},
            {"width", m.camera.width},
            {"height", m.camera.height},
            {"hfov", m.camera.hfov},
            {"mount_height", m.camera.mount_height},
            {"max_range", m.camera.max_range},
            {"action_space", m.action_space == ActionSpace::Discrete ? "discrete" : "continuous"}}}};
}

ResetMessage reset_from_json(const Json& j) {
  return guarded("reset", [&] {
    ResetMessage m;
    m.episode_id = j.at("episode").get<std::string>();
    const Json& g = j.at("goal_spec");
    m.goal = {g.at("object").get<std::string>(), g.at("start_receptacle").get<std::string>(),
              g.at("goal_receptacle").get<std::string>()};
    const Json& c = j.at("config");
    m.seed = c.at("seed").get<std::uint64_t>();
    m.camera.width = c.at("width").get<int>();
    m.camera.height = c.at("height").get<int>();
    m.camera.hfov = c.at("hfov").get<double>();
    m.camera.mount_height = c.at("mount_height").get<double>();
    m.camera.max_range = c.at("max_range").get<double>();
    const auto space = c.at("action_space").get<std::string>();
    if (space != "discrete" && space != "continuous") {
      throw ProtocolError(fmt::format("unknown action space '{}'", space));
    }
    m.action_space = space == "discrete" ? ActionSpace::Discrete : ActionSpace::Continuous;
    if (m.camera.width <= 0 || m.camera.height <= 0) throw ProtocolError("camera size must be positive");
    return m;
  });
}

Json observation_to_json(const Observation& obs) {
  Json labels = Json::object();
  for (const auto& [id, name] : obs.labels) labels[std::to_string(id)] = name;
  return {{"type", "observation"},
          {"step", obs.step},
          {"width", obs.frame.width},
          {"height", obs.frame.height},
          {"depth_b64_f32le", encode_f32le(obs.frame.depth)},
          {"semantic_b64_u16le", encode_u16le(obs.frame.semantic)},
          {"labels", labels},
          {"pose", {obs.pose_rel_start.x, obs.pose_rel_start.y, obs.pose_rel_start.yaw}},
          {"joints", joints_to_json(obs.joints)},
          {"mode", mode_name(obs.mode)},
          {"holding", obs.holding}};
}

Observation observation_from_json(const Json& j, const GoalSpec& goal) {
  return guarded("observation", [&] {
    Observation obs;
    obs.step = j.at("step").get<int>();
    obs.frame.width = j.at("width").get<int>();
    obs.frame.height = j.at("height").get<int>();
    if (obs.frame.width <= 0 || obs.frame.height <= 0) throw ProtocolError("frame size must be positive");
    const auto n = static_cast<std::size_t>(obs.frame.width) * obs.frame.height;
    obs.frame.depth = decode_f32le(j.at("depth_b64_f32le").get<std::string>(), n);
    obs.frame.semantic = decode_u16le(j.at("semantic_b64_u16le").get<std::string>(), n);
    for (const auto& [key, name] : j.at("labels").items()) {
      std::size_t used = 0;
      const unsigned long id = std::stoul(key, &used);
      if (used != key.size() || id > 0xffff) throw ProtocolError(fmt::format("bad label id '{}'", key));
      obs.labels[static_cast<InstanceId>(id)] = name.get<std::string>();
    }
    const auto pose = j.at("pose").get<std::vector<double>>();
    if (pose.size() != 3) throw ProtocolError("pose must have three entries");
    obs.pose_rel_start = {pose[0], pose[1], pose[2]};
    obs.joints = joints_from_json(j.at("joints"));
    obs.mode = mode_from(j.at("mode").get<std::string>());
    obs.holding = j.at("holding").get<bool>();
    obs.goal = goal;
    return obs;
  });
}

Json action_to_json(const Action& a) {
  struct Visitor {
    Json operator()(const DiscreteMove&) const { return {{"variant", "discrete"}}; }
    Json operator()(const Waypoint& w) const {
      return {{"variant", "waypoint"}, {"dx", w.dx}, {"dy", w.dy}, {"dyaw", w.dyaw}};
    }
    Json operator()(const JointDeltas& d) const {
      return {{"variant", "joint_deltas"},  {"base_forward", d.base_forward},
              {"base_turn", d.base_turn},   {"lift", d.lift},
              {"arm_extension", d.arm_extension}, {"head_pan", d.head_pan},
              {"head_tilt", d.head_tilt},   {"wrist_yaw", d.wrist_yaw},
              {"wrist_pitch", d.wrist_pitch}, {"wrist_roll", d.wrist_roll},
              {"gripper", d.gripper}};
    }
    Json operator()(const Grasp&) const { return {{"variant", "grasp"}}; }
    Json operator()(const Release&) const { return {{"variant", "release"}}; }
    Json operator()(const EnterManipulationMode&) const { return {{"variant", "manipulation_mode"}}; }
    Json operator()(const SetHeadTilt& t) const { return {{"variant", "head_tilt"}, {"tilt", t.tilt}}; }
  };
  Json j = std::visit(Visitor{}, a);
  j["type"] = "action";
  if (const auto* m = std::get_if<DiscreteMove>(&a)) j["move"] = action_name(*m);
  return j;
}

Action action_from_json(const Json& j) {
  return guarded("action", [&]() -> Action {
    const auto variant = j.at("variant").get<std::string>();
    if (variant == "discrete") {
      const auto move = j.at("move").get<std::string>();
      for (auto k : {DiscreteMove::Kind::Forward, DiscreteMove::Kind::TurnLeft,
                     DiscreteMove::Kind::TurnRight, DiscreteMove::Kind::Stop}) {
        if (action_name(DiscreteMove{k}) == move) return DiscreteMove{k};
      }
      throw ProtocolError(fmt::format("unknown discrete move '{}'", move));
    }
    if (variant == "waypoint") {
      return Waypoint{j.at("dx").get<double>(), j.at("dy").get<double>(), j.at("dyaw").get<double>()};
    }
    if (variant == "joint_deltas") {
      JointDeltas d;
      auto opt = [&](const char* key, double& field) {
        if (j.contains(key)) field = j.at(key).get<double>();
      };
      opt("base_forward", d.base_forward);
      opt("base_turn", d.base_turn);
      opt("lift", d.lift);
      opt("arm_extension", d.arm_extension);
      opt("head_pan", d.head_pan);
      opt("head_tilt", d.head_tilt);
      opt("wrist_yaw", d.wrist_yaw);
      opt("wrist_pitch", d.wrist_pitch);
      opt("wrist_roll", d.wrist_roll);
      opt("gripper", d.gripper);
      return d;
    }
    if (variant == "grasp") return Grasp{};
    if (variant == "release") return Release{};
    if (variant == "manipulation_mode") return EnterManipulationMode{};
    if (variant == "head_tilt") return SetHeadTilt{j.at("tilt").get<double>()};
    throw ProtocolError(fmt::format("unknown action variant '{}'", variant));
  });
}

Json result_message(const EpisodeResult& r) {
  return {{"type", "result"},         {"episode", r.episode_id},
          {"find_obj", r.outcome.find_obj}, {"pick", r.outcome.pick},
          {"find_rec", r.outcome.find_rec}, {"place", r.outcome.place},
          {"overall", r.overall},     {"partial", r.partial}};
}

Json parse_message(std::string_view line, std::string_view expected_type) {
  Json j = Json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("malformed JSON from agent");
  const auto it = j.find("type");
  if (it == j.end() || !it->is_string() || it->get<std::string>() != expected_type) {
    throw ProtocolError(fmt::format("expected a '{}' message", expected_type));
  }
  return j;
}

LineChannel::LineChannel(int read_fd, int write_fd, std::chrono::milliseconds timeout)
    : read_fd_(read_fd), write_fd_(write_fd), timeout_(timeout) {
  ensure_sodium();
}

LineChannel::~LineChannel() {
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
}

void LineChannel::send(const Json& message) {
  if (write_fd_ < 0) throw ProtocolError("channel closed for writing");
  write_all(write_fd_, message.dump() + "\n");
}

std::string LineChannel::receive() {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  while (true) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw ProtocolError("agent timed out");
    pollfd p{read_fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(fmt::format("poll failed: {}", std::strerror(errno)));
    }
    if (rc == 0) continue;
    char chunk[65536];
    const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(fmt::format("read from agent failed: {}", std::strerror(errno)));
    }
    if (n == 0) throw ProtocolError("agent closed the connection");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void LineChannel::close_write() {
  if (write_fd_ >= 0 && write_fd_ != read_fd_) {
    ::close(write_fd_);
  } else if (write_fd_ >= 0) {
    ::shutdown(write_fd_, SHUT_WR);
  }
  if (write_fd_ != read_fd_) write_fd_ = -1;
}

ExternalAgent::ExternalAgent(ExternalEndpoint endpoint, CameraModel camera, ActionSpace space,
                             std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), camera_(camera), space_(space), timeout_(timeout) {
  ensure_sodium();
}

ExternalAgent::~ExternalAgent() { shutdown(); }

void ExternalAgent::shutdown() {
  if (channel_) {
    channel_->close_write();
    channel_.reset();
  }
  if (child_ > 0) {
    // Give the child a moment to exit on EOF, then make sure it is gone.
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(child_, &status, WNOHANG) == child_) {
        child_ = -1;
        return;
      }
      ::usleep(2000);
    }
    ::kill(child_, SIGKILL);
    ::waitpid(child_, &status, 0);
    child_ = -1;
  }
}

void ExternalAgent::reset(const std::string& episode_id, const GoalSpec& goal, std::uint64_t seed) {
  shutdown();
  failure_.clear();
  if (endpoint_.kind == ExternalEndpoint::Kind::Tcp) {
    const int fd = connect_tcp(endpoint_.target);
    channel_.emplace(fd, fd, timeout_);
  } else {
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0 || ::pipe2(from_child, O_CLOEXEC) != 0) {
      throw ProtocolError("cannot create pipes for the agent");
    }
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_adddup2(&fa, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&fa, from_child[1], STDOUT_FILENO);
    const char* argv[] = {"/bin/sh", "-c", endpoint_.target.c_str(), nullptr};
    pid_t pid = -1;
    const int rc = ::posix_spawn(&pid, "/bin/sh", &fa, nullptr, const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&fa);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      throw ProtocolError(fmt::format("cannot start agent '{}': {}", endpoint_.target, std::strerror(rc)));
    }
    child_ = pid;
    channel_.emplace(from_child[0], to_child[1], timeout_);
  }
  channel_->send(reset_to_json({episode_id, goal, seed, camera_, space_}));
  parse_message(channel_->receive(), "ready");
}

Action ExternalAgent::act(const Observation& obs) {
  if (!channel_) throw ProtocolError("agent not reset");
  channel_->send(observation_to_json(obs));
  const Json reply = parse_message(channel_->receive(), "action");
  if (const auto it = reply.find("failure"); it != reply.end() && it->is_string()) {
    failure_ = it->get<std::string>();
  }
  return action_from_json(reply);
}

void ExternalAgent::finish(const EpisodeResult& result) {
  if (channel_) {
    try {
      channel_->send(result_message(result));
    } catch (const ProtocolError&) {
      // The agent may already be gone; the result is recorded either way.
    }
  }
  shutdown();
}

void serve_agent(int read_fd, int write_fd, const AgentConfig& base_config) {
  LineChannel channel(read_fd, write_fd, std::chrono::hours(24));
  std::optional<HeuristicAgent> agent;
  GoalSpec goal;
  while (true) {
    std::string line;
    try {
      line = channel.receive();
    } catch (const ProtocolError&) {
      return;  // harness hung up
    }
    Json msg = Json::parse(line, nullptr, false);
    if (msg.is_discarded() || !msg.contains("type")) throw ProtocolError("malformed message from harness");
    const auto type = msg.at("type").get<std::string>();
    if (type == "reset") {
      const ResetMessage m = reset_from_json(msg);
      AgentConfig cfg = base_config;
      cfg.camera = m.camera;
      cfg.action_space = m.action_space;
      agent.emplace(cfg);
      goal = m.goal;
      agent->reset(m.episode_id, m.goal, m.seed);
      channel.send({{"type", "ready"}});
    } else if (type == "observation") {
      if (!agent) throw ProtocolError("observation before reset");
      Json reply = action_to_json(agent->act(observation_from_json(msg, goal)));
      if (const std::string why = agent->failure(); !why.empty()) reply["failure"] = why;
      channel.send(reply);
    } else if (type == "result") {
      agent.reset();
    } else {
      throw ProtocolError(fmt::format("unexpected message type '{}'", type));
    }
  }
}

void serve_agent_tcp(int port, const AgentConfig& base_config, int max_sessions,
                     const std::function<void(int)>& on_listening) {
  ensure_sodium();
  const int listener = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listener < 0) throw Error("cannot create a listening socket");
  const int one = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listener, 16) != 0) {
    ::close(listener);
    throw Error(fmt::format("cannot listen on port {}: {}", port, std::strerror(errno)));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_listening) on_listening(ntohs(addr.sin_port));
  for (int served = 0; max_sessions <= 0 || served < max_sessions; ++served) {
    const int fd = ::accept4(listener, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    try {
      serve_agent(fd, fd, base_config);
    } catch (const Error&) {
      // A bad session only ends that connection.
    }
  }
  ::close(listener);
}

}  // namespace ovmm
