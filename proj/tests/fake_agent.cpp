// Scripted stand-in for a remote agent, driven by argv:
//   fake_agent stop                 answer every observation with Stop
//   fake_agent malformed <episode>  send broken JSON during that episode
//   fake_agent hangup               exit on the first observation
//   fake_agent silent               never answer observations
#include <iostream>
#include <string>

#include <json.hpp>

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "stop";
  const std::string bad_episode = argc > 2 ? argv[2] : "";
  std::string episode;
  std::string line;
  while (std::getline(std::cin, line)) {
    const auto msg = nlohmann::json::parse(line, nullptr, false);
    if (msg.is_discarded()) return 2;
    const std::string type = msg.value("type", "");
    if (type == "reset") {
      episode = msg.at("episode").get<std::string>();
      std::cout << R"({"type":"ready"})" << std::endl;
    } else if (type == "observation") {
      if (mode == "hangup") return 0;
      if (mode == "silent") continue;
      if (mode == "malformed" && episode == bad_episode) {
        std::cout << R"({"type":"action","variant":)" << std::endl;
      } else {
        std::cout << R"({"type":"action","variant":"discrete","move":"stop"})" << std::endl;
      }
    } else if (type == "result") {
      return 0;
    }
  }
  return 0;
}
