#pragma once

// Checkpoint directory:
//   header.json   format_version, namespace, config, config_hash, param_hash,
//                 blocks [{name, rows, cols, offset, trainable}]
//   params.f32    every block's values, little-endian float32, row-major,
//                 concatenated in header order

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "eigenet/dataset/io.hpp"
#include "eigenet/nn/params.hpp"

namespace eigenet::nn {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kCheckpointFormatVersion = 1;

inline std::uint64_t config_hash(const json& config) { return fnv1a(config.dump()); }

inline std::string hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<std::size_t>(i)] = digits[h & 0xF];
  return s;
}

template <typename T>
void save_checkpoint(const fs::path& dir, const ParamStore<T>& ps, const std::string& ns, const json& config) {
  fs::create_directories(dir);
  json blocks = json::array();
  std::vector<float> blob;
  blob.reserve(ps.numel());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& m = ps.value(i);
    blocks.push_back({{"name", ps.name(i)}, {"rows", m.rows()}, {"cols", m.cols()},
                      {"offset", blob.size()}, {"trainable", ps.trainable(i)}});
    for (Eigen::Index k = 0; k < m.size(); ++k) blob.push_back(static_cast<float>(m.data()[k]));
  }
  data::detail::write_f32(dir / "params.f32", blob);
  json header = {{"format_version", kCheckpointFormatVersion},
                 {"namespace", ns},
                 {"config", config},
                 {"config_hash", hex(config_hash(config))},
                 {"param_hash", hex(ps.hash())},
                 {"blocks", blocks}};
  std::ofstream(dir / "header.json") << header.dump(2) << '\n';
}

inline json read_checkpoint_header(const fs::path& dir) {
  const fs::path path = dir / "header.json";
  require(fs::exists(path), ErrorKind::MissingArtifact, "missing checkpoint header " + path.string());
  json header = json::parse(std::ifstream(path));
  require(header.value("format_version", -1) == kCheckpointFormatVersion, ErrorKind::FormatVersionMismatch,
          "unsupported checkpoint format_version in " + path.string());
  return header;
}

/// Loads a checkpoint into a fresh store.
template <typename T>
ParamStore<T> load_checkpoint(const fs::path& dir, json* header_out = nullptr) {
  const json header = read_checkpoint_header(dir);
  std::size_t total = 0;
  for (const auto& b : header.at("blocks")) total += b.at("rows").get<std::size_t>() * b.at("cols").get<std::size_t>();
  const auto blob = data::detail::read_f32(dir / "params.f32", total);
  ParamStore<T> ps;
  for (const auto& b : header.at("blocks")) {
    const auto rows = b.at("rows").get<Eigen::Index>(), cols = b.at("cols").get<Eigen::Index>();
    const auto off = b.at("offset").get<std::size_t>();
    require(off + static_cast<std::size_t>(rows * cols) <= blob.size(), ErrorKind::ShapeMismatch,
            "checkpoint block exceeds blob");
    Mat<T> m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<T>(blob[off + static_cast<std::size_t>(k)]);
    ps.add(b.at("name").get<std::string>(), std::move(m), b.value("trainable", true));
  }
  if (header_out) *header_out = header;
  return ps;
}

}  // namespace eigenet::nn
