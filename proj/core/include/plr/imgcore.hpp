#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace plr::img {

/// 8-bit single-channel raster, row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0);
  GrayImage(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }
  std::size_t size() const noexcept { return pixels_.size(); }

  std::uint8_t at(int x, int y) const { return pixels_[index(x, y)]; }
  std::uint8_t& at(int x, int y) { return pixels_[index(x, y)]; }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  bool operator==(const GrayImage&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Row-major boolean raster; true marks the lung region.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool value) { bits_[index(x, y)] = value ? 1 : 0; }

  std::size_t count() const;
  bool any() const { return count() > 0; }
  bool matches(const GrayImage& img) const {
    return img.width() == width_ && img.height() == height_;
  }

  /// Intensity >= 128 marks a true bit.
  static BinaryMask from_image(const GrayImage& img);
  GrayImage to_image() const;

  bool operator==(const BinaryMask&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Loads an 8-bit grayscale PNG or binary PGM (P5, maxval 255). The format
/// is chosen from the file signature, not the extension. Color, alpha and
/// 16-bit inputs are rejected with ErrorCode::kUnsupportedFormat.
GrayImage load_image(const std::filesystem::path& path);

/// Writes PGM when the extension is .pgm, PNG otherwise.
void save_image(const GrayImage& img, const std::filesystem::path& path);

BinaryMask load_mask(const std::filesystem::path& path);
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);

/// Half-pixel-centered bilinear resampling, rounded half up and clamped.
GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h);

struct AugmentRange {
  double lo = 0.8;
  double hi = 1.2;
};

/// Inverse-mapped zoom/shear warp about the image center. For every output
/// pixel the source location is center + zoom * [[1, shear-1], [0, 1]] *
/// (dst - center); zoom < 1 magnifies, shear == 1 means no shear. Samples
/// falling outside the source read as 0.
GrayImage affine_augment(const GrayImage& img, double zoom, double shear,
                         AugmentRange range = {});

struct AugmentDraw {
  double zoom;
  double shear;
};

/// Draws zoom and shear independently and uniformly from the range.
AugmentDraw draw_augment(std::uint64_t seed, AugmentRange range = {});

/// Pixels darker than the threshold, minus every dark component that touches
/// the image border (the air around the body).
BinaryMask derive_lung_mask(const GrayImage& img, std::uint8_t threshold);

std::uint8_t quantize(double value);

}  // namespace plr::img
