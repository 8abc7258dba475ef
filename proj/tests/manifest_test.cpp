#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "plr/error.hpp"
#include "plr/manifest.hpp"
#include "test_util.hpp"

using namespace plr::corrupt;

namespace {

std::filesystem::path touch(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p) << "x";
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

plr::ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const plr::Error& e) {
    return e.code();
  }
  return plr::ErrorCode::kIo;
}

}  // namespace

TEST(Manifest, WritesRelativePathsAndResolvesThemBack) {
  plr::test::TempDir dir;
  DatasetManifest m;
  m.entries.push_back({touch(dir / "data/a.png"), touch(dir / "data/a_orig.png"), std::nullopt});
  m.entries.push_back({touch(dir / "b.png"), touch(dir / "b_orig.png"), std::nullopt});
  write_manifest(m, dir / "data/m.jsonl");
  EXPECT_EQ(slurp(dir / "data/m.jsonl"),
            "{\"input\":\"a.png\",\"target\":\"a_orig.png\"}\n"
            "{\"input\":\"../b.png\",\"target\":\"../b_orig.png\"}\n");
  const auto back = read_manifest(dir / "data/m.jsonl");
  EXPECT_EQ(back.entries, m.entries);
  EXPECT_TRUE(back.is_restoration());
  EXPECT_FALSE(back.spec.has_value());
  EXPECT_FALSE(std::filesystem::exists(dir / "data/m.jsonl.meta.json"));
}

TEST(Manifest, SidecarCarriesSpecAndSplit) {
  plr::test::TempDir dir;
  DatasetManifest m;
  m.entries.push_back({touch(dir / "a.png"), std::nullopt, 1});
  m.entries.push_back({touch(dir / "b.png"), std::nullopt, 0});
  CorruptionSpec spec;
  spec.strategy = Strategy::kShuffle;
  spec.grid = 7;
  spec.sigma = 1.5;
  spec.seed = 12;
  m.spec = spec;
  m.split = Split::kVal;
  write_manifest(m, dir / "m.jsonl");
  const auto back = read_manifest(dir / "m.jsonl");
  EXPECT_TRUE(back.is_classification());
  EXPECT_EQ(back.split, Split::kVal);
  ASSERT_TRUE(back.spec);
  EXPECT_EQ(*back.spec, spec);
}

TEST(Manifest, ValidationRejectsMixedOrBadEntries) {
  plr::test::TempDir dir;
  const auto a = touch(dir / "a.png");
  DatasetManifest mixed;
  mixed.entries.push_back({a, a, std::nullopt});
  mixed.entries.push_back({a, std::nullopt, 0});
  EXPECT_THROW(mixed.validate(), plr::Error);

  DatasetManifest both;
  both.entries.push_back({a, a, 1});
  EXPECT_THROW(both.validate(), plr::Error);

  DatasetManifest label;
  label.entries.push_back({a, std::nullopt, 2});
  EXPECT_THROW(label.validate(), plr::Error);

  DatasetManifest missing;
  missing.entries.push_back({dir / "nope.png", std::nullopt, 0});
  EXPECT_EQ(code_of([&] { write_manifest(missing, dir / "m.jsonl"); }), plr::ErrorCode::kIo);
}

TEST(Manifest, ReaderReportsMalformedLines) {
  plr::test::TempDir dir;
  auto write = [&](const std::string& text) {
    std::ofstream(dir / "m.jsonl") << text;
    return dir / "m.jsonl";
  };
  EXPECT_EQ(code_of([&] { read_manifest(write("{not json}\n")); }), plr::ErrorCode::kCorruptFile);
  EXPECT_EQ(code_of([&] { read_manifest(write("{\"target\":\"a\"}\n")); }), plr::ErrorCode::kCorruptFile);
  EXPECT_EQ(code_of([&] { read_manifest(write("{\"input\":\"a\",\"extra\":1}\n")); }), plr::ErrorCode::kCorruptFile);
  EXPECT_EQ(code_of([&] { read_manifest(write("{\"input\":\"a\",\"label\":\"1\"}\n")); }), plr::ErrorCode::kCorruptFile);
  EXPECT_EQ(code_of([&] { read_manifest(dir / "absent.jsonl"); }), plr::ErrorCode::kIo);

  const auto m = read_manifest(write("\n{\"input\":\"/abs/a.png\",\"label\":1}\n  \n"));
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.entries[0].input, std::filesystem::path("/abs/a.png"));
}
