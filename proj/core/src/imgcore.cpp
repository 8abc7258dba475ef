#include "plr/imgcore.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "plr/error.hpp"
#include "plr/rng.hpp"

namespace plr::img {

namespace {

constexpr std::array<std::uint8_t, 8> kPngSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_dims(int w, int h) {
  require(w > 0 && h > 0, ErrorCode::kInvalidArgument, "image dimensions must be positive");
}

GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space();
    long value = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      value = value * 10 + (bytes[pos] - '0');
      ++pos;
      ++digits;
      require(value < (1L << 30), ErrorCode::kCorruptFile, name + ": PGM header value too large");
    }
    require(digits > 0, ErrorCode::kCorruptFile, name + ": malformed PGM header");
    return value;
  };
  const long w = read_int();
  const long h = read_int();
  const long maxval = read_int();
  require(maxval == 255, ErrorCode::kUnsupportedFormat,
          name + ": only 8-bit PGM (maxval 255) is supported, got maxval " + std::to_string(maxval));
  require(pos < bytes.size() && std::isspace(bytes[pos]), ErrorCode::kCorruptFile,
          name + ": malformed PGM header");
  ++pos;
  require(w > 0 && h > 0, ErrorCode::kCorruptFile, name + ": zero PGM dimension");
  const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  require(bytes.size() - pos >= n, ErrorCode::kCorruptFile, name + ": truncated PGM payload");
  std::vector<std::uint8_t> px(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                               bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return {static_cast<int>(w), static_cast<int>(h), std::move(px)};
}

GrayImage decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  // IHDR is always the first chunk: signature(8) length(4) type(4) w(4) h(4) depth(1) color(1).
  require(bytes.size() >= 26 && std::memcmp(bytes.data() + 12, "IHDR", 4) == 0,
          ErrorCode::kCorruptFile, name + ": missing PNG IHDR");
  const int bit_depth = bytes[24];
  const int color_type = bytes[25];
  require(color_type == 0, ErrorCode::kUnsupportedFormat,
          name + ": PNG color type " + std::to_string(color_type) + " is not 8-bit grayscale");
  require(bit_depth == 8, ErrorCode::kUnsupportedFormat,
          name + ": PNG bit depth " + std::to_string(bit_depth) + " is not 8");

  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    fail(ErrorCode::kCorruptFile, name + ": " + image.message);
  }
  if ((image.format & (PNG_FORMAT_FLAG_ALPHA | PNG_FORMAT_FLAG_COLOR)) != 0) {
    png_image_free(&image);
    fail(ErrorCode::kUnsupportedFormat, name + ": PNG with transparency or color is not supported");
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    fail(ErrorCode::kCorruptFile, name + ": " + msg);
  }
  return {static_cast<int>(image.width), static_cast<int>(image.height), std::move(px)};
}

bool has_pgm_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".pgm";
}

double sample_or_zero(const GrayImage& img, int x, int y) {
  if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return 0.0;
  return img.at(x, y);
}

}  // namespace

GrayImage::GrayImage(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
  check_dims(width, height);
  pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  check_dims(width, height);
  require(pixels_.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
          ErrorCode::kShapeMismatch, "pixel count does not match width*height");
}

BinaryMask::BinaryMask(int width, int height, bool fill) : width_(width), height_(height) {
  check_dims(width, height);
  bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill ? 1 : 0);
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BinaryMask BinaryMask::from_image(const GrayImage& img) {
  BinaryMask mask(img.width(), img.height());
  auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) mask.bits_[i] = px[i] >= 128 ? 1 : 0;
  return mask;
}

GrayImage BinaryMask::to_image() const {
  GrayImage img(width_, height_);
  auto px = img.pixels();
  for (std::size_t i = 0; i < bits_.size(); ++i) px[i] = bits_[i] ? 255 : 0;
  return img;
}

std::uint8_t quantize(double value) {
  const double r = std::floor(value + 0.5);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

GrayImage load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const std::string name = path.string();
  if (bytes.size() >= 8 && std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin())) {
    return decode_png(bytes, name);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P') {
    require(bytes[1] == '5', ErrorCode::kUnsupportedFormat,
            name + ": only binary grayscale PGM (P5) is supported");
    return decode_pgm(bytes, name);
  }
  fail(ErrorCode::kUnsupportedFormat, name + ": not a PNG or PGM file");
}

void save_image(const GrayImage& img, const std::filesystem::path& path) {
  require(!img.empty(), ErrorCode::kInvalidArgument, "cannot save an empty image");
  if (has_pgm_extension(path)) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
    out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels().data()),
              static_cast<std::streamsize>(img.size()));
    require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());
    return;
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, img.pixels().data(), 0, nullptr)) {
    fail(ErrorCode::kIo, "PNG encode failed for " + path.string() + ": " + image.message);
  }
  std::vector<std::uint8_t> encoded(size);
  if (!png_image_write_to_memory(&image, encoded.data(), &size, 0, img.pixels().data(), 0, nullptr)) {
    fail(ErrorCode::kIo, "PNG encode failed for " + path.string() + ": " + image.message);
  }
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(encoded.data()), static_cast<std::streamsize>(size));
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());
}

BinaryMask load_mask(const std::filesystem::path& path) { return BinaryMask::from_image(load_image(path)); }

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) { save_image(mask.to_image(), path); }

GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h) {
  require(out_w > 0 && out_h > 0, ErrorCode::kInvalidArgument, "resize target must be positive");
  require(!img.empty(), ErrorCode::kInvalidArgument, "cannot resize an empty image");
  if (out_w == img.width() && out_h == img.height()) return img;

  struct Tap {
    int i0, i1;
    double frac;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      double s = (o + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in - 1));
      const int i0 = static_cast<int>(std::floor(s));
      const int i1 = std::min(i0 + 1, in - 1);
      t[static_cast<std::size_t>(o)] = {i0, i1, s - i0};
    }
    return t;
  };
  const auto tx = taps(img.width(), out_w);
  const auto ty = taps(img.height(), out_h);

  GrayImage out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const Tap& vy = ty[static_cast<std::size_t>(y)];
    for (int x = 0; x < out_w; ++x) {
      const Tap& vx = tx[static_cast<std::size_t>(x)];
      const double p00 = img.at(vx.i0, vy.i0), p10 = img.at(vx.i1, vy.i0);
      const double p01 = img.at(vx.i0, vy.i1), p11 = img.at(vx.i1, vy.i1);
      const double top = p00 + (p10 - p00) * vx.frac;
      const double bottom = p01 + (p11 - p01) * vx.frac;
      out.at(x, y) = quantize(top + (bottom - top) * vy.frac);
    }
  }
  return out;
}

GrayImage affine_augment(const GrayImage& img, double zoom, double shear, AugmentRange range) {
  auto in_range = [&](double v) { return v >= range.lo && v <= range.hi; };
  require(in_range(zoom) && in_range(shear), ErrorCode::kInvalidArgument,
          "augmentation factors must lie in [" + std::to_string(range.lo) + ", " +
              std::to_string(range.hi) + "]");
  const double cx = (img.width() - 1) * 0.5;
  const double cy = (img.height() - 1) * 0.5;
  const double skew = shear - 1.0;

  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    const double dy = y - cy;
    for (int x = 0; x < img.width(); ++x) {
      const double dx = x - cx;
      const double sx = cx + zoom * (dx + skew * dy);
      const double sy = cy + zoom * dy;
      const double fx0 = std::floor(sx), fy0 = std::floor(sy);
      const double fx = sx - fx0, fy = sy - fy0;
      const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
      const double p00 = sample_or_zero(img, x0, y0), p10 = sample_or_zero(img, x0 + 1, y0);
      const double p01 = sample_or_zero(img, x0, y0 + 1), p11 = sample_or_zero(img, x0 + 1, y0 + 1);
      const double top = p00 + (p10 - p00) * fx;
      const double bottom = p01 + (p11 - p01) * fx;
      out.at(x, y) = quantize(top + (bottom - top) * fy);
    }
  }
  return out;
}

AugmentDraw draw_augment(std::uint64_t seed, AugmentRange range) {
  Rng rng(seed);
  const double zoom = rng.uniform(range.lo, range.hi);
  const double shear = rng.uniform(range.lo, range.hi);
  return {zoom, shear};
}

BinaryMask derive_lung_mask(const GrayImage& img, std::uint8_t threshold) {
  const int w = img.width(), h = img.height();
  BinaryMask mask(w, h);
  std::vector<std::uint8_t> background(img.size(), 0);
  std::vector<std::pair<int, int>> stack;
  auto dark = [&](int x, int y) { return img.at(x, y) < threshold; };
  auto seed_bg = [&](int x, int y) {
    const auto i = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
    if (!background[i] && dark(x, y)) {
      background[i] = 1;
      stack.emplace_back(x, y);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed_bg(x, 0);
    seed_bg(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed_bg(0, y);
    seed_bg(w - 1, y);
  }
  while (!stack.empty()) {
    const auto [x, y] = stack.back();
    stack.pop_back();
    if (x > 0) seed_bg(x - 1, y);
    if (x + 1 < w) seed_bg(x + 1, y);
    if (y > 0) seed_bg(x, y - 1);
    if (y + 1 < h) seed_bg(x, y + 1);
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
      mask.set(x, y, dark(x, y) && !background[i]);
    }
  }
  return mask;
}

}  // namespace plr::img
