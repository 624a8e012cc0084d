#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "eigenet/dataset/io.hpp"
#include "eigenet/dataset/sampling.hpp"
#include "eigenet/simulator/scene_sampler.hpp"

using namespace eigenet;
using namespace eigenet::data;
namespace fs = std::filesystem;

namespace {

template <typename F>
void expect_error(ErrorKind kind, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("eigenet_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Scene small_scene(std::uint64_t seed) {
  sim::SceneSamplerConfig cfg;
  cfg.max_order = 4;
  cfg.num_sources = 10;
  return sim::sample_scene(seed, cfg);
}

Scene bare_scene(std::size_t sources) {
  Scene s;
  for (std::size_t i = 0; i < sources; ++i) {
    s.sources.emplace_back(static_cast<double>(i) + 1.0, 0.0, 0.0);
    s.rirs.emplace_back(std::vector<double>(16, 0.0), 16000);
  }
  return s;
}

}  // namespace

TEST(SceneIo, RoundTripIsBitExact) {
  TempDir dir("roundtrip");
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto s = small_scene(seed);
    write_scene(s, dir.path / s.scene_id);
    EXPECT_TRUE(read_scene(dir.path / s.scene_id) == s) << s.scene_id;
  }
}

TEST(SceneIo, LittleEndianFloatLayout) {
  TempDir dir("layout");
  const auto s = small_scene(4);
  write_scene(s, dir.path);
  std::ifstream in(dir.path / "rirs.f32", std::ios::binary);
  unsigned char b[4];
  // Second RIR, sample 10: offset (1 * L + 10) * 4 bytes.
  in.seekg(static_cast<std::streamoff>((s.rir_length() + 10) * 4));
  in.read(reinterpret_cast<char*>(b), 4);
  const std::uint32_t u = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  EXPECT_EQ(std::bit_cast<float>(u), static_cast<float>(s.rirs[1].samples[10]));
  EXPECT_EQ(fs::file_size(dir.path / "depth.f32"), s.depth.values.size() * 4);
}

TEST(SceneIo, TruncatedRirsRaisesShapeMismatch) {
  TempDir dir("truncated");
  write_scene(small_scene(5), dir.path);
  fs::resize_file(dir.path / "rirs.f32", fs::file_size(dir.path / "rirs.f32") - 4);
  expect_error(ErrorKind::ShapeMismatch, [&] { read_scene(dir.path); });
}

TEST(SceneIo, UnknownFormatVersion) {
  TempDir dir("version");
  write_scene(small_scene(6), dir.path);
  auto m = nlohmann::json::parse(std::ifstream(dir.path / "manifest.json"));
  m["format_version"] = 99;
  std::ofstream(dir.path / "manifest.json") << m.dump();
  expect_error(ErrorKind::FormatVersionMismatch, [&] { read_scene(dir.path); });
}

TEST(SceneIo, MissingManifest) {
  TempDir dir("missing");
  expect_error(ErrorKind::MissingArtifact, [&] { read_scene(dir.path); });
}

TEST(SceneIo, ManifestKeepsAbsolutePoses) {
  const auto s = small_scene(7);
  const auto m = scene_manifest(s);
  for (std::size_t i = 0; i < s.sources.size(); ++i)
    EXPECT_EQ(m["sources_absolute"][i][0].get<double>(), s.source_absolute(i).x());
}

TEST(Splits, EightTwoRatio) {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("scene_" + std::to_string(i));
  const auto [train, test] = make_splits(ids, 0.8, 3);
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(test.size(), 2u);
  const auto again = make_splits(ids, 0.8, 3);
  EXPECT_EQ(again.first, train);
  EXPECT_EQ(again.second, test);
  std::set<std::string> seen(train.begin(), train.end());
  for (const auto& id : test) EXPECT_FALSE(seen.count(id));
  EXPECT_EQ(seen.size() + test.size(), ids.size());
}

TEST(Splits, SizesWithinOneOfRatio) {
  for (std::size_t n : {2u, 3u, 7u, 50u, 101u})
    for (double r : {0.1, 0.5, 0.8, 0.95}) {
      std::vector<std::string> ids;
      for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
      const auto [train, test] = make_splits(ids, r, 1);
      EXPECT_LE(std::abs(static_cast<double>(train.size()) - r * static_cast<double>(n)), 1.0);
      EXPECT_FALSE(test.empty());
      EXPECT_FALSE(train.empty());
    }
}

TEST(Splits, Errors) {
  expect_error(ErrorKind::EmptyInput, [] { make_splits({}, 0.8, 0); });
  expect_error(ErrorKind::ConfigInvalid, [] { make_splits({"a", "b"}, 1.0, 0); });
}

TEST(Sampling, AllOthersWhenKIsMaximal) {
  const auto s = bare_scene(9);
  Rng rng(1);
  const auto ex = sample_example(s, 8, rng);
  auto refs = ex.reference_indices;
  std::sort(refs.begin(), refs.end());
  std::vector<std::size_t> expect;
  for (std::size_t i = 0; i < 9; ++i)
    if (i != ex.target_index) expect.push_back(i);
  EXPECT_EQ(refs, expect);
}

TEST(Sampling, TwoSourceScene) {
  const auto s = bare_scene(2);
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const auto ex = sample_example(s, 1, rng);
    ASSERT_EQ(ex.reference_indices.size(), 1u);
    EXPECT_EQ(ex.reference_indices[0], 1 - ex.target_index);
  }
}

TEST(Sampling, TargetFrequencyIsUniform) {
  const auto s = bare_scene(10);
  Rng rng(3);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 10000; ++i) counts[sample_example(s, 4, rng).target_index] += 1;
  for (int c : counts) EXPECT_NEAR(c / 10000.0, 0.1, 0.01);
}

TEST(Sampling, DistinctIndicesAndDeterminism) {
  const auto s = bare_scene(12);
  Rng a(4), b(4);
  for (int i = 0; i < 200; ++i) {
    const auto k = static_cast<std::size_t>(1 + i % 8);
    const auto ex = sample_example(s, k, a);
    const auto ex2 = sample_example(s, k, b);
    EXPECT_EQ(ex.reference_indices, ex2.reference_indices);
    EXPECT_EQ(ex.target_index, ex2.target_index);
    std::set<std::size_t> uniq(ex.reference_indices.begin(), ex.reference_indices.end());
    EXPECT_EQ(uniq.size(), k);
    EXPECT_FALSE(uniq.count(ex.target_index));
    for (auto idx : uniq) EXPECT_LT(idx, 12u);
  }
}

TEST(Sampling, TooFewSources) {
  const auto s = bare_scene(4);
  Rng rng(5);
  expect_error(ErrorKind::TooFewSources, [&] { sample_example(s, 4, rng); });
}

TEST(SceneValidation, Invariants) {
  auto s = small_scene(8);
  EXPECT_NO_THROW(s.validate());
  auto fewer = s;
  fewer.sources.resize(8);
  fewer.rirs.resize(8);
  expect_error(ErrorKind::TooFewSources, [&] { fewer.validate(); });
  auto ragged = s;
  ragged.rirs[3].samples.pop_back();
  expect_error(ErrorKind::ShapeMismatch, [&] { ragged.validate(); });
}
