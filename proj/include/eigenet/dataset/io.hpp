#pragma once

// On-disk scene format (see docs/dataset-format.md):
//   <dir>/manifest.json   metadata, poses, shapes, format_version
//   <dir>/rirs.f32        num_sources × rir_length little-endian float32, row-major
//   <dir>/depth.f32       height × width little-endian float32, row-major

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "eigenet/dataset/scene.hpp"

namespace eigenet::data {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kSceneFormatVersion = 1;

namespace detail {

inline json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from(const json& j) {
  require(j.is_array() && j.size() == 3, ErrorKind::ShapeMismatch, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline void write_f32(const fs::path& path, const std::vector<float>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  std::vector<char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto u = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<char>((u >> (8 * b)) & 0xFFu);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorKind::Io, "short write to " + path.string());
}

inline std::vector<float> read_f32(const fs::path& path, std::size_t expected) {
  require(fs::exists(path), ErrorKind::MissingArtifact, "missing " + path.string());
  const auto size = fs::file_size(path);
  require(size == expected * 4, ErrorKind::ShapeMismatch,
          path.filename().string() + " holds " + std::to_string(size) + " bytes, manifest implies " +
              std::to_string(expected * 4));
  std::ifstream in(path, std::ios::binary);
  std::vector<char> bytes(size);
  in.read(bytes.data(), static_cast<std::streamsize>(size));
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
  std::vector<float> values(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
    values[i] = std::bit_cast<float>(u);
  }
  return values;
}

}  // namespace detail

inline json scene_manifest(const Scene& s) {
  json sources = json::array(), absolute = json::array();
  for (std::size_t i = 0; i < s.sources.size(); ++i) {
    sources.push_back(detail::vec3_json(s.sources[i]));
    absolute.push_back(detail::vec3_json(s.source_absolute(i)));
  }
  return {{"format_version", kSceneFormatVersion},
          {"scene_id", s.scene_id},
          {"room",
           {{"dimensions", detail::vec3_json(s.room.dimensions)},
            {"wall_absorption", s.room.wall_absorption},
            {"speed_of_sound", s.room.speed_of_sound}}},
          {"receiver_absolute", detail::vec3_json(s.receiver_absolute)},
          {"sources", sources},
          {"sources_absolute", absolute},
          {"num_sources", s.sources.size()},
          {"sample_rate", s.sample_rate()},
          {"rir_length", s.rir_length()},
          {"depth_shape", {s.depth.height, s.depth.width}},
          {"files", {{"rirs", "rirs.f32"}, {"depth", "depth.f32"}}}};
}

inline void write_scene(const Scene& s, const fs::path& dir) {
  s.validate();
  fs::create_directories(dir);
  std::vector<float> rirs;
  rirs.reserve(s.rirs.size() * static_cast<std::size_t>(s.rir_length()));
  for (const auto& r : s.rirs)
    for (double v : r.samples) rirs.push_back(static_cast<float>(v));
  detail::write_f32(dir / "rirs.f32", rirs);
  detail::write_f32(dir / "depth.f32", s.depth.values);
  std::ofstream(dir / "manifest.json") << scene_manifest(s).dump(2) << '\n';
}

inline Scene read_scene(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  require(fs::exists(mpath), ErrorKind::MissingArtifact, "missing " + mpath.string());
  json m;
  try {
    m = json::parse(std::ifstream(mpath));
  } catch (const json::exception& e) {
    fail(ErrorKind::Io, "malformed manifest " + mpath.string() + ": " + e.what());
  }
  require(m.value("format_version", -1) == kSceneFormatVersion, ErrorKind::FormatVersionMismatch,
          "unsupported scene format_version in " + mpath.string());

  Scene s;
  s.scene_id = m.at("scene_id").get<std::string>();
  const auto& room = m.at("room");
  s.room.dimensions = detail::vec3_from(room.at("dimensions"));
  s.room.wall_absorption = room.at("wall_absorption").get<std::array<double, 6>>();
  s.room.speed_of_sound = room.at("speed_of_sound").get<double>();
  s.receiver_absolute = detail::vec3_from(m.at("receiver_absolute"));
  for (const auto& p : m.at("sources")) s.sources.push_back(detail::vec3_from(p));

  const auto n = m.at("num_sources").get<std::size_t>();
  const auto fs_hz = m.at("sample_rate").get<int>();
  const auto len = m.at("rir_length").get<std::size_t>();
  require(n == s.sources.size(), ErrorKind::ShapeMismatch, "num_sources disagrees with sources list");
  const auto shape = m.at("depth_shape").get<std::vector<int>>();
  require(shape.size() == 2, ErrorKind::ShapeMismatch, "depth_shape must have two entries");

  const auto raw = detail::read_f32(dir / "rirs.f32", n * len);
  for (std::size_t i = 0; i < n; ++i)
    s.rirs.emplace_back(std::vector<double>(raw.begin() + static_cast<std::ptrdiff_t>(i * len),
                                            raw.begin() + static_cast<std::ptrdiff_t>((i + 1) * len)),
                        fs_hz);
  s.depth.height = shape[0];
  s.depth.width = shape[1];
  s.depth.values = detail::read_f32(dir / "depth.f32", static_cast<std::size_t>(shape[0]) * shape[1]);
  return s;
}

/// A corpus directory holds `corpus.json` (scene ids plus generation config)
/// and one scene directory per id under `scenes/`.
inline std::vector<std::string> list_corpus(const fs::path& dir) {
  const fs::path index = dir / "corpus.json";
  require(fs::exists(index), ErrorKind::MissingArtifact, "missing " + index.string());
  return json::parse(std::ifstream(index)).at("scene_ids").get<std::vector<std::string>>();
}

/// Scene ids of a named split ("train" or "test") recorded in corpus.json.
inline std::vector<std::string> corpus_split(const fs::path& dir, const std::string& split) {
  const fs::path index = dir / "corpus.json";
  require(fs::exists(index), ErrorKind::MissingArtifact, "missing " + index.string());
  const auto j = json::parse(std::ifstream(index));
  require(j.contains("splits") && j.at("splits").contains(split), ErrorKind::MissingArtifact,
          index.string() + " has no split named " + split);
  return j.at("splits").at(split).get<std::vector<std::string>>();
}

inline std::vector<Scene> read_corpus(const fs::path& dir, const std::vector<std::string>& ids) {
  std::vector<Scene> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(read_scene(dir / "scenes" / id));
  return out;
}

}  // namespace eigenet::data
