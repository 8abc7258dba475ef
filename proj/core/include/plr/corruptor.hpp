#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "plr/corruption_spec.hpp"
#include "plr/imgcore.hpp"
#include "plr/lesionbank.hpp"
#include "plr/manifest.hpp"

namespace plr::corrupt {

/// Pastes `count` bank patches drawn uniformly with replacement. Each patch
/// is centered on a uniformly drawn mask pixel (top-left = center - size/2)
/// and only mask-true pixels inside its rectangle are written. Later patches
/// overwrite earlier ones in replace mode.
img::GrayImage paste_patches(const img::GrayImage& image, const img::BinaryMask& mask,
                             const lesion::PatchBank& bank, int count, std::uint64_t seed,
                             PasteMode mode = PasteMode::kReplace);

/// 0.3 * ((k - 1) * 0.5 - 1) + 0.8 when sigma is not given.
double resolve_sigma(int kernel_size, std::optional<double> sigma);

/// Normalized 1D Gaussian weights of odd length kernel_size.
std::vector<double> gaussian_kernel(int kernel_size, std::optional<double> sigma);

/// Separable blur before quantization, row-major. Borders reflect without
/// repeating the edge sample (dcb|abcd|cba).
std::vector<double> gaussian_blur_real(const img::GrayImage& image, int kernel_size,
                                       std::optional<double> sigma);

img::GrayImage gaussian_blur(const img::GrayImage& image, int kernel_size, std::optional<double> sigma);

/// Splits the image into grid x grid blocks (the last row and column take the
/// remainder) and Fisher-Yates shuffles the pixels of each block. Blocks are
/// visited in row-major order and all draw from one stream seeded by `seed`.
img::GrayImage local_shuffle(const img::GrayImage& image, int grid, std::uint64_t seed);

/// Applies one strategy to one image. The mask and bank are only consulted by
/// the Perlin strategy.
img::GrayImage corrupt_image(const img::GrayImage& image, const img::BinaryMask* mask,
                             const lesion::PatchBank* bank, const CorruptionSpec& spec,
                             std::uint64_t seed);

struct DatasetRequest {
  std::vector<std::filesystem::path> normals;
  /// Empty means derive each mask with derive_lung_mask(spec.mask_threshold).
  std::vector<std::filesystem::path> masks;
  const lesion::PatchBank* bank = nullptr;
  CorruptionSpec spec;
  std::size_t count = 0;
  std::filesystem::path out_dir;
  std::filesystem::path manifest_path;
};

/// Item i corrupts normal i mod N with seed spec.seed + i and is written as
/// out_dir/pseudo_{i:05}.png; the manifest pairs it with the original path.
DatasetManifest generate_dataset(const DatasetRequest& request);

}  // namespace plr::corrupt
