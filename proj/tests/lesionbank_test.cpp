#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "plr/error.hpp"
#include "plr/lesionbank.hpp"
#include "plr/perlin.hpp"
#include "plr/rng.hpp"
#include "test_util.hpp"

using namespace plr::lesion;
using plr::img::GrayImage;

namespace {

std::vector<GrayImage> noise_images(int count) {
  std::vector<GrayImage> out;
  for (int i = 0; i < count; ++i) out.push_back(plr::perlin::render_noise_image(100 + i, 512, {}));
  return out;
}

double mean_oracle(const GrayImage& img) {
  const auto px = img.pixels();
  return std::accumulate(px.begin(), px.end(), 0.0) / static_cast<double>(px.size());
}

}  // namespace

TEST(MeanIntensity, IsArithmeticMean) {
  GrayImage img(2, 2, std::vector<std::uint8_t>{0, 255, 100, 101});
  EXPECT_DOUBLE_EQ(mean_intensity(img), 114.0);
}

TEST(SamplePatch, CropsTheRecordedRectangle) {
  const auto src = noise_images(1)[0];
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto p = sample_patch(src, s, {5, 25});
    ASSERT_TRUE(SizeRange{}.contains(p.width()));
    ASSERT_TRUE(SizeRange{}.contains(p.height()));
    ASSERT_LE(p.source_x + p.width(), src.width());
    ASSERT_LE(p.source_y + p.height(), src.height());
    for (int y = 0; y < p.height(); ++y)
      for (int x = 0; x < p.width(); ++x) ASSERT_EQ(p.pixels.at(x, y), src.at(p.source_x + x, p.source_y + y));
    EXPECT_DOUBLE_EQ(p.mean_intensity, mean_oracle(p.pixels));
    EXPECT_EQ(sample_patch(src, s, {5, 25}), p);
  }
}

TEST(SamplePatch, ConstantSourcesGiveTheirValue) {
  EXPECT_EQ(sample_patch(GrayImage(40, 40, 255), 1, {5, 25}).mean_intensity, 255.0);
  EXPECT_EQ(sample_patch(GrayImage(40, 40, 0), 1, {5, 25}).mean_intensity, 0.0);
}

TEST(SamplePatch, SizesAreUniformOverTheRange) {
  // Chi-square over the 21 side lengths, 20 degrees of freedom; 37.57 is the
  // 0.99 quantile, so a correct sampler fails this about once in a hundred seeds.
  const GrayImage src(64, 64, 128);
  std::vector<double> widths(21, 0.0), heights(21, 0.0);
  const int n = 10000;
  for (int s = 0; s < n; ++s) {
    const auto p = sample_patch(src, static_cast<std::uint64_t>(s), {5, 25});
    widths[static_cast<std::size_t>(p.width() - 5)] += 1;
    heights[static_cast<std::size_t>(p.height() - 5)] += 1;
  }
  auto chi2 = [&](const std::vector<double>& counts) {
    const double expect = n / 21.0;
    double c = 0;
    for (double v : counts) c += (v - expect) * (v - expect) / expect;
    return c;
  };
  EXPECT_LT(chi2(widths), 37.57);
  EXPECT_LT(chi2(heights), 37.57);
}

TEST(SamplePatch, RejectsSourcesSmallerThanMaxSize) {
  EXPECT_THROW(sample_patch(GrayImage(10, 10), 0, {5, 25}), plr::Error);
  EXPECT_THROW(sample_patch(GrayImage(30, 30), 0, {6, 5}), plr::Error);
}

TEST(BuildBank, AcceptsOnlyBrightPatches) {
  const auto imgs = noise_images(3);
  const auto bank = build_bank(imgs, 300, 180.0, {5, 25}, 17);
  ASSERT_EQ(bank.count(), 300u);
  EXPECT_EQ(bank.params.source_count, 3u);
  for (const auto& p : bank.patches) {
    EXPECT_GT(mean_oracle(p.pixels), 180.0);
    EXPECT_DOUBLE_EQ(p.mean_intensity, mean_oracle(p.pixels));
    EXPECT_LT(p.source_image, 3u);
    const auto& src = imgs[p.source_image];
    EXPECT_EQ(p.pixels.at(0, 0), src.at(p.source_x, p.source_y));
  }
}

TEST(BuildBank, SameSeedSameBytes) {
  const auto imgs = noise_images(2);
  const auto a = build_bank(imgs, 100, 170.0, {5, 25}, 3);
  const auto b = build_bank(imgs, 100, 170.0, {5, 25}, 3);
  EXPECT_EQ(encode_bank(a), encode_bank(b));
  EXPECT_NE(encode_bank(build_bank(imgs, 100, 170.0, {5, 25}, 4)), encode_bank(a));
}

TEST(BuildBank, ZeroThresholdTakesTheFirstCandidates) {
  const auto imgs = noise_images(1);
  const auto bank = build_bank(imgs, 50, 0.0, {5, 6}, 0);
  ASSERT_EQ(bank.count(), 50u);
  // A bank with one more slot starts with the same 50 patches.
  const auto more = build_bank(imgs, 51, 0.0, {5, 6}, 0);
  EXPECT_TRUE(std::equal(bank.patches.begin(), bank.patches.end(), more.patches.begin()));
}

TEST(BuildBank, ImpossibleThresholdGivesUp) {
  const std::vector<GrayImage> flat = {GrayImage(32, 32, 100)};
  try {
    build_bank(flat, 1, 256.0, {5, 5}, 0);
    FAIL() << "expected AttemptsExhausted";
  } catch (const plr::Error& e) {
    EXPECT_EQ(e.code(), plr::ErrorCode::kAttemptsExhausted);
  }
}

TEST(BuildBank, NeedsNoiseImages) {
  try {
    build_bank({}, 1, 0.0, {5, 5}, 0);
    FAIL();
  } catch (const plr::Error& e) {
    EXPECT_EQ(e.code(), plr::ErrorCode::kEmptyInput);
  }
}

TEST(BankFile, RoundTripsThroughDisk) {
  const auto bank = build_bank(noise_images(1), 20, 150.0, {5, 25}, 9);
  plr::test::TempDir dir;
  save_bank(bank, dir / "b.plb");
  EXPECT_EQ(load_bank(dir / "b.plb"), bank);
}

TEST(BankFile, RejectsDamagedBytes) {
  const auto bytes = encode_bank(build_bank(noise_images(1), 5, 150.0, {5, 25}, 9));
  auto code = [](std::vector<std::uint8_t> b) {
    try {
      decode_bank(b);
    } catch (const plr::Error& e) {
      return e.code();
    }
    return plr::ErrorCode::kInvalidArgument;
  };
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(code(bad_magic), plr::ErrorCode::kCorruptFile);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_EQ(code(bad_version), plr::ErrorCode::kVersionMismatch);
  EXPECT_EQ(code({bytes.begin(), bytes.end() - 1}), plr::ErrorCode::kCorruptFile);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_EQ(code(trailing), plr::ErrorCode::kCorruptFile);
}
