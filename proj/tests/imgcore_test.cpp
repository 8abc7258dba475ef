#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <vector>

#include "plr/error.hpp"
#include "plr/imgcore.hpp"
#include "plr/rng.hpp"
#include "test_util.hpp"

namespace {

using plr::ErrorCode;
using plr::img::BinaryMask;
using plr::img::GrayImage;

GrayImage random_image(int w, int h, std::uint64_t seed) {
  plr::Rng rng(seed);
  GrayImage img(w, h);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return img;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const plr::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected plr::Error";
  return ErrorCode::kInvalidArgument;
}

// Straightforward half-pixel bilinear written independently of the library.
// Returns the unrounded values.
std::vector<double> resize_oracle(const GrayImage& src, int ow, int oh) {
  std::vector<double> out;
  auto coord = [](int o, int in, int outn) {
    double s = (o + 0.5) * in / outn - 0.5;
    if (s < 0) s = 0;
    if (s > in - 1) s = in - 1;
    return s;
  };
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double sx = coord(x, src.width(), ow), sy = coord(y, src.height(), oh);
      const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, src.width() - 1), y1 = std::min(y0 + 1, src.height() - 1);
      const double fx = sx - x0, fy = sy - y0;
      const double v = (1 - fx) * (1 - fy) * src.at(x0, y0) + fx * (1 - fy) * src.at(x1, y0) +
                       (1 - fx) * fy * src.at(x0, y1) + fx * fy * src.at(x1, y1);
      out.push_back(v);
    }
  }
  return out;
}

}  // namespace

TEST(Quantize, RoundsHalfUpAndClamps) {
  EXPECT_EQ(plr::img::quantize(0.5), 1);
  EXPECT_EQ(plr::img::quantize(1.49), 1);
  EXPECT_EQ(plr::img::quantize(254.5), 255);
  EXPECT_EQ(plr::img::quantize(-3.0), 0);
  EXPECT_EQ(plr::img::quantize(300.0), 255);
}

TEST(GrayImage, RejectsMismatchedPixelBuffer) {
  EXPECT_THROW(GrayImage(3, 3, std::vector<std::uint8_t>(8)), plr::Error);
}

TEST(ImageIo, PngAndPgmRoundTrip) {
  plr::test::TempDir dir;
  const auto img = random_image(17, 9, 1);
  plr::img::save_image(img, dir / "a.png");
  plr::img::save_image(img, dir / "a.pgm");
  EXPECT_EQ(plr::img::load_image(dir / "a.png"), img);
  EXPECT_EQ(plr::img::load_image(dir / "a.pgm"), img);
}

TEST(ImageIo, ParsesKnownPgmBytes) {
  plr::test::TempDir dir;
  const std::string pgm = std::string("P5\n2 2\n255\n") + std::string("\x00\xff\x80\x07", 4);
  write_bytes(dir / "k.pgm", {pgm.begin(), pgm.end()});
  const auto img = plr::img::load_image(dir / "k.pgm");
  EXPECT_EQ(img, GrayImage(2, 2, std::vector<std::uint8_t>{0, 255, 128, 7}));
}

TEST(ImageIo, RandomImagesRoundTrip) {
  plr::test::TempDir dir;
  plr::Rng rng(77);
  for (int i = 0; i < 20; ++i) {
    const auto img = random_image(static_cast<int>(rng.uniform_int(1, 50)), static_cast<int>(rng.uniform_int(1, 50)), rng.next_u64());
    const auto path = dir / (std::to_string(i) + (i % 2 ? ".pgm" : ".png"));
    plr::img::save_image(img, path);
    ASSERT_EQ(plr::img::load_image(path), img);
  }
  plr::img::save_image(GrayImage(1, 1, 42), dir / "one.png");
  EXPECT_EQ(plr::img::load_image(dir / "one.png").at(0, 0), 42);
}

TEST(ImageIo, UnwritablePathThrows) {
  EXPECT_THROW(plr::img::save_image(GrayImage(2, 2), "/nonexistent_dir/x/y.png"), plr::Error);
  EXPECT_THROW(plr::img::save_image(GrayImage(2, 2), "/nonexistent_dir/x/y.pgm"), plr::Error);
}

TEST(ImageIo, FormatFollowsSignatureNotExtension) {
  plr::test::TempDir dir;
  const auto img = random_image(5, 4, 2);
  plr::img::save_image(img, dir / "x.pgm");
  std::filesystem::rename(dir / "x.pgm", dir / "x.png");
  EXPECT_EQ(plr::img::load_image(dir / "x.png"), img);
}

TEST(ImageIo, RejectsColorPngAndOddPgm) {
  plr::test::TempDir dir;
  // Signature and IHDR of a 1x1 RGB PNG; rejected before any decoding.
  std::vector<std::uint8_t> rgb = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n', 0, 0, 0, 13, 'I', 'H', 'D', 'R',
                                   0,    0,   0,   1,   0,    0,    0,    1,    8, 2, 0, 0,  0,   0,   0,   0};
  write_bytes(dir / "rgb.png", rgb);
  EXPECT_EQ(code_of([&] { plr::img::load_image(dir / "rgb.png"); }), ErrorCode::kUnsupportedFormat);

  const std::string pgm16 = "P5\n1 1\n65535\n\x01\x02";
  write_bytes(dir / "deep.pgm", {pgm16.begin(), pgm16.end()});
  EXPECT_EQ(code_of([&] { plr::img::load_image(dir / "deep.pgm"); }), ErrorCode::kUnsupportedFormat);

  const std::string truncated = "P5\n4 4\n255\n\x01";
  write_bytes(dir / "short.pgm", {truncated.begin(), truncated.end()});
  EXPECT_EQ(code_of([&] { plr::img::load_image(dir / "short.pgm"); }), ErrorCode::kCorruptFile);

  write_bytes(dir / "text.png", {'h', 'e', 'l', 'l', 'o'});
  EXPECT_EQ(code_of([&] { plr::img::load_image(dir / "text.png"); }), ErrorCode::kUnsupportedFormat);

  EXPECT_EQ(code_of([&] { plr::img::load_image(dir / "missing.png"); }), ErrorCode::kIo);
}

TEST(BinaryMask, ThresholdAt128AndRoundTrip) {
  GrayImage img(4, 1, std::vector<std::uint8_t>{0, 127, 128, 255});
  const auto mask = BinaryMask::from_image(img);
  EXPECT_FALSE(mask.at(0, 0));
  EXPECT_FALSE(mask.at(1, 0));
  EXPECT_TRUE(mask.at(2, 0));
  EXPECT_TRUE(mask.at(3, 0));
  EXPECT_EQ(mask.count(), 2u);

  plr::test::TempDir dir;
  plr::img::save_mask(mask, dir / "m.png");
  EXPECT_EQ(plr::img::load_mask(dir / "m.png"), mask);
}

TEST(Resize, MatchesIndependentBilinear) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    plr::Rng rng(seed + 100);
    const int w = static_cast<int>(rng.uniform_int(1, 40)), h = static_cast<int>(rng.uniform_int(1, 40));
    const int ow = static_cast<int>(rng.uniform_int(1, 40)), oh = static_cast<int>(rng.uniform_int(1, 40));
    const auto img = random_image(w, h, seed);
    const auto got = plr::img::resize_bilinear(img, ow, oh);
    const auto want = resize_oracle(img, ow, oh);
    ASSERT_EQ(got.width(), ow);
    ASSERT_EQ(got.height(), oh);
    for (std::size_t i = 0; i < want.size(); ++i) {
      const double v = want[i];
      const int g = got.pixels()[i];
      // Exact .5 ties may round either way depending on evaluation order.
      if (std::abs(v - std::floor(v) - 0.5) < 1e-9) {
        EXPECT_TRUE(g == std::floor(v) || g == std::ceil(v)) << i;
      } else {
        EXPECT_EQ(g, std::floor(v + 0.5)) << w << "x" << h << " -> " << ow << "x" << oh << " at " << i;
      }
    }
  }
}

TEST(Resize, HalvingAveragesBlocks) {
  const auto img = random_image(8, 6, 3);
  const auto half = plr::img::resize_bilinear(img, 4, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 4; ++x) {
      const int sum = img.at(2 * x, 2 * y) + img.at(2 * x + 1, 2 * y) + img.at(2 * x, 2 * y + 1) +
                      img.at(2 * x + 1, 2 * y + 1);
      EXPECT_EQ(half.at(x, y), plr::img::quantize(sum / 4.0));
    }
  }
}

TEST(Resize, ConstantImageStaysConstantAndSameSizeIsIdentity) {
  const GrayImage flat(7, 5, 93);
  const auto big = plr::img::resize_bilinear(flat, 23, 11);
  for (auto p : big.pixels()) EXPECT_EQ(p, 93);
  const auto img = random_image(9, 9, 4);
  EXPECT_EQ(plr::img::resize_bilinear(img, 9, 9), img);
}

TEST(Resize, UpsampledRampIsMonotone) {
  const GrayImage ramp(2, 1, std::vector<std::uint8_t>{0, 255});
  const auto out = plr::img::resize_bilinear(ramp, 4, 1);
  for (int x = 1; x < 4; ++x) EXPECT_LE(out.at(x - 1, 0), out.at(x, 0));
  const auto big = plr::img::resize_bilinear(GrayImage(512, 512, 1), 224, 224);
  EXPECT_EQ(big.width(), 224);
  EXPECT_EQ(big.height(), 224);
}

TEST(Augment, UnitFactorsAreIdentity) {
  const auto img = random_image(16, 12, 5);
  EXPECT_EQ(plr::img::affine_augment(img, 1.0, 1.0), img);
}

TEST(Augment, OutOfRangeFactorsThrow) {
  const auto img = random_image(8, 8, 6);
  EXPECT_EQ(code_of([&] { plr::img::affine_augment(img, 1.3, 1.0); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { plr::img::affine_augment(img, 1.0, 0.7); }), ErrorCode::kInvalidArgument);
}

TEST(Augment, ZoomAboveOneReadsZerosBeyondTheSource) {
  const GrayImage flat(20, 20, 200);
  const auto out = plr::img::affine_augment(flat, 1.2, 1.0);
  EXPECT_EQ(out.at(0, 0), 0);
  EXPECT_EQ(out.at(10, 10), 200);
}

TEST(Augment, ZoomBelowOneMagnifies) {
  GrayImage img(40, 40, 0);
  for (int y = 15; y < 25; ++y)
    for (int x = 15; x < 25; ++x) img.at(x, y) = 255;
  auto bright = [](const GrayImage& g) {
    int n = 0;
    for (auto p : g.pixels()) n += p > 128;
    return n;
  };
  EXPECT_GT(bright(plr::img::affine_augment(img, 0.8, 1.0)), bright(img));
}

TEST(Augment, ShearMovesRowsByTheirOffset) {
  // Source x = cx + (dx + 0.2 * dy): rows below the center read further right.
  GrayImage ramp(21, 21);
  for (int y = 0; y < 21; ++y)
    for (int x = 0; x < 21; ++x) ramp.at(x, y) = static_cast<std::uint8_t>(10 * x);
  const auto out = plr::img::affine_augment(ramp, 1.0, 1.2);
  EXPECT_EQ(out.at(10, 10), 100);
  EXPECT_EQ(out.at(10, 15), plr::img::quantize(10.0 * (10 + 0.2 * 5)));
  EXPECT_EQ(out.at(10, 5), plr::img::quantize(10.0 * (10 - 0.2 * 5)));
}

TEST(Augment, DrawsStayInRangeAndRepeat) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto d = plr::img::draw_augment(s);
    EXPECT_GE(d.zoom, 0.8);
    EXPECT_LT(d.zoom, 1.2);
    EXPECT_GE(d.shear, 0.8);
    EXPECT_LT(d.shear, 1.2);
    const auto again = plr::img::draw_augment(s);
    EXPECT_EQ(d.zoom, again.zoom);
    EXPECT_EQ(d.shear, again.shear);
  }
}

TEST(LungMask, DropsDarkRegionsTouchingTheBorder) {
  GrayImage img(12, 10, 0);  // air
  for (int y = 2; y < 8; ++y)
    for (int x = 2; x < 10; ++x) img.at(x, y) = 180;  // body
  img.at(4, 4) = 20;
  img.at(5, 4) = 30;  // lung pixels
  img.at(7, 5) = 99;
  const auto mask = plr::img::derive_lung_mask(img, 100);
  EXPECT_EQ(mask.count(), 3u);
  EXPECT_TRUE(mask.at(4, 4));
  EXPECT_TRUE(mask.at(5, 4));
  EXPECT_TRUE(mask.at(7, 5));
  EXPECT_FALSE(mask.at(0, 0));
}

TEST(LungMask, WhiteImageGivesEmptyMask) {
  const auto mask = plr::img::derive_lung_mask(GrayImage(16, 9, 255), 100);
  EXPECT_EQ(mask.width(), 16);
  EXPECT_EQ(mask.height(), 9);
  EXPECT_EQ(mask.count(), 0u);
}

TEST(LungMask, DarkDiskOnWhiteMatchesTheDisk) {
  const int n = 101;
  const double r = 30.0;
  GrayImage img(n, n, 255);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if (std::hypot(x - 50.0, y - 50.0) <= r) img.at(x, y) = 20;
  const auto mask = plr::img::derive_lung_mask(img, 100);
  int inter = 0, uni = 0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const bool disk = (x - 50.0) * (x - 50.0) + (y - 50.0) * (y - 50.0) <= r * r;
      inter += disk && mask.at(x, y);
      uni += disk || mask.at(x, y);
    }
  }
  EXPECT_GE(static_cast<double>(inter) / uni, 0.95);
}
