#include <doctest.h>

#include <unistd.h>

#include <bit>
#include <cstring>
#include <limits>
#include <future>
#include <thread>

#include <fmt/format.h>

#include "fixtures.hpp"
#include "ovmm/harness.hpp"
#include "ovmm/protocol.hpp"

using namespace ovmm;

namespace {

struct Pipe {
  int fd[2]{-1, -1};
  Pipe() { REQUIRE(::pipe(fd) == 0); }
};

Observation sample_observation() {
  Observation o;
  o.step = 7;
  o.frame.width = 3;
  o.frame.height = 2;
  o.frame.depth = {0.0f, 1.5f, 2.25f, std::numeric_limits<float>::infinity(),
                   std::nanf("0x123"), -0.0f};
  o.frame.semantic = {0, 1, 2, 65535, 3, 0};
  o.labels = {{1, "table"}, {3, "cup"}};
  o.pose_rel_start = {0.1, -0.2, 0.3};
  o.joints.lift = 0.7;
  o.mode = RobotMode::Manipulation;
  o.holding = true;
  o.goal = {"cup", "table", "counter"};
  return o;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

RunConfig fake_config(const std::string& args) {
  RunConfig cfg;
  cfg.agent = AgentSpec::parse(fmt::format("exec:{} {}", OVMM_FAKE_AGENT, args));
  cfg.global_seed = 11;
  cfg.agent_timeout = std::chrono::milliseconds(3000);
  return cfg;
}

}  // namespace

TEST_SUITE("protocol") {
  TEST_CASE("payload codecs round trip bit for bit") {
    const Observation o = sample_observation();
    const auto depth = decode_f32le(encode_f32le(o.frame.depth), o.frame.depth.size());
    CHECK(same_bits(depth, o.frame.depth));
    CHECK(decode_u16le(encode_u16le(o.frame.semantic), 6) == o.frame.semantic);
    CHECK(encode_u16le(std::vector<std::uint16_t>{1}) == "AQA=");
  }

  TEST_CASE("truncated or corrupt payloads are protocol errors") {
    const std::vector<float> v{1.0f, 2.0f, 3.0f};
    std::string b64 = encode_f32le(v);
    CHECK_THROWS_AS(decode_f32le(b64.substr(0, b64.size() - 4), 3), ProtocolError);
    CHECK_THROWS_AS(decode_f32le(b64, 4), ProtocolError);
    CHECK_THROWS_AS(decode_f32le(b64, 2), ProtocolError);
    b64[1] = '*';
    CHECK_THROWS_AS(decode_f32le(b64, 3), ProtocolError);
  }

  TEST_CASE("messages round trip through JSON text") {
    const Observation o = sample_observation();
    const Json wire = Json::parse(observation_to_json(o).dump());
    const Observation back = observation_from_json(wire, o.goal);
    CHECK(same_bits(back.frame.depth, o.frame.depth));
    CHECK(back.frame.semantic == o.frame.semantic);
    CHECK(back.labels == o.labels);
    CHECK(back.pose_rel_start == o.pose_rel_start);
    CHECK(back.joints == o.joints);
    CHECK(back.mode == o.mode);
    CHECK(back.holding);

    ResetMessage r{"ep_1", {"cup", "table", "counter"}, 42, {}, ActionSpace::Continuous};
    CHECK(reset_from_json(Json::parse(reset_to_json(r).dump())) == r);

    const std::vector<Action> actions = {
        DiscreteMove{DiscreteMove::Kind::Forward}, DiscreteMove{DiscreteMove::Kind::Stop},
        Waypoint{0.5, -0.25, 0.1}, JointDeltas{.lift = 0.05, .gripper = -1.0}, Grasp{}, Release{},
        EnterManipulationMode{}, SetHeadTilt{-0.7}};
    for (const auto& a : actions) {
      CHECK(action_from_json(Json::parse(action_to_json(a).dump())) == a);
    }
  }

  TEST_CASE("bad messages raise protocol errors") {
    CHECK_THROWS_AS(parse_message("{\"type\":", "action"), ProtocolError);
    CHECK_THROWS_AS(parse_message("[1,2]", "action"), ProtocolError);
    CHECK_THROWS_AS(parse_message("{\"type\":\"ready\"}", "action"), ProtocolError);
    CHECK(parse_message("{\"type\":\"ready\"}", "ready")["type"] == "ready");
    CHECK_THROWS_AS(action_from_json(Json{{"variant", "jump"}}), ProtocolError);
    CHECK_THROWS_AS(action_from_json(Json{{"variant", "discrete"}, {"move", "fly"}}), ProtocolError);
    CHECK_THROWS_AS(action_from_json(Json{{"variant", "waypoint"}, {"dx", 1.0}}), ProtocolError);
    Json obs = observation_to_json(sample_observation());
    obs["width"] = 4;
    CHECK_THROWS_AS(observation_from_json(obs, {}), ProtocolError);
    obs = observation_to_json(sample_observation());
    obs["mode"] = "flying";
    CHECK_THROWS_AS(observation_from_json(obs, {}), ProtocolError);
  }

  TEST_CASE("serve_agent over pipes answers like the in-process agent") {
    const Dataset data = testing::trivial_suite();
    const Episode& ep = data.episodes.front();
    Simulator sim(data.scenes.at(ep.scene_id), ep, {}, 3);
    const Observation obs = sim.observe();

    HeuristicAgent local;
    local.reset(ep.id, obs.goal, 3);
    const Action expected = local.act(obs);

    Pipe to_server;
    Pipe from_server;
    std::thread server([&] { serve_agent(to_server.fd[0], from_server.fd[1], {}); });
    {
      LineChannel client(from_server.fd[0], to_server.fd[1], std::chrono::seconds(10));
      client.send(reset_to_json({ep.id, obs.goal, 3, {}, ActionSpace::Discrete}));
      CHECK(parse_message(client.receive(), "ready").is_object());
      client.send(observation_to_json(obs));
      CHECK(action_from_json(parse_message(client.receive(), "action")) == expected);
    }
    server.join();
  }

  TEST_CASE("a malformed reply voids one episode and the batch continues") {
    const Dataset data = testing::trivial_suite();
    const BatchResult out = run_batch(fake_config("malformed trivial_3"), data);
    REQUIRE(out.results.size() == 5);
    for (const auto& r : out.results) {
      if (r.episode_id == "trivial_3") {
        CHECK(r.failure_reason == "protocol");
        CHECK_FALSE(r.outcome.find_obj);
        CHECK(r.partial == 0.0);
      } else {
        CHECK(r.failure_reason.empty());
        CHECK(r.total_steps == 1);
      }
    }
  }

  TEST_CASE("hangups and silence are protocol failures") {
    const Dataset all = testing::trivial_suite();
    const Dataset one = make_dataset({all.scenes.at("trivial_a")}, {all.episodes.front()});
    auto cfg = fake_config("hangup");
    CHECK(run_batch(cfg, one).results[0].failure_reason == "protocol");
    cfg = fake_config("silent");
    cfg.agent_timeout = std::chrono::milliseconds(200);
    CHECK(run_batch(cfg, one).results[0].failure_reason == "protocol");
    cfg.agent = AgentSpec::parse("exec:/nonexistent/agent");
    CHECK(run_batch(cfg, one).results[0].failure_reason == "protocol");
  }

  TEST_CASE("the TCP transport matches the in-process agent") {
    const Dataset all = testing::trivial_suite();
    const Dataset one = make_dataset({all.scenes.at("trivial_a")}, {all.episodes.front()});
    RunConfig cfg;
    cfg.global_seed = 4;
    const BatchResult local = run_batch(cfg, one);

    std::promise<int> port;
    auto ready = port.get_future();
    std::thread server([&] { serve_agent_tcp(0, {}, 1, [&](int p) { port.set_value(p); }); });
    cfg.agent = AgentSpec::parse(fmt::format("tcp:127.0.0.1:{}", ready.get()));
    const BatchResult remote = run_batch(cfg, one);
    server.join();
    CHECK(results_to_jsonl(remote.results) == results_to_jsonl(local.results));
  }
}
