#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "ovmm/grid.hpp"
#include "ovmm/scene.hpp"

namespace ovmm {

using Json = nlohmann::json;

inline constexpr int kSceneSchemaVersion = 1;
inline constexpr int kEpisodeSchemaVersion = 1;

Json grid_to_json(const BinaryGrid& g);
BinaryGrid grid_from_json(const Json& j);

Json scene_to_json(const Scene& scene);
Scene scene_from_json(const Json& j);

Json episode_to_json(const Episode& episode);
Episode episode_from_json(const Json& j);

Json object_to_json(const ObjectInstance& o);
ObjectInstance object_from_json(const Json& j);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

Scene load_scene(const std::filesystem::path& path);
void save_scene(const Scene& scene, const std::filesystem::path& path);
Episode load_episode(const std::filesystem::path& path);
void save_episode(const Episode& episode, const std::filesystem::path& path);

}  // namespace ovmm
