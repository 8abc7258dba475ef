#include "plr/corruptor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "plr/error.hpp"
#include "plr/rng.hpp"

namespace plr::corrupt {

namespace fs = std::filesystem;

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kPerlin: return "perlin";
    case Strategy::kGaussian: return "gaussian";
    case Strategy::kShuffle: return "shuffle";
  }
  return "perlin";
}

std::string_view to_string(PasteMode m) { return m == PasteMode::kMax ? "max" : "replace"; }

Strategy parse_strategy(std::string_view name) {
  if (name == "perlin") return Strategy::kPerlin;
  if (name == "gaussian") return Strategy::kGaussian;
  if (name == "shuffle") return Strategy::kShuffle;
  fail(ErrorCode::kInvalidArgument, "unknown strategy '" + std::string(name) + "'");
}

PasteMode parse_paste_mode(std::string_view name) {
  if (name == "replace") return PasteMode::kReplace;
  if (name == "max") return PasteMode::kMax;
  fail(ErrorCode::kInvalidArgument, "unknown paste mode '" + std::string(name) + "'");
}

void CorruptionSpec::validate() const {
  require(kernel_size >= 3 && kernel_size % 2 == 1, ErrorCode::kInvalidArgument,
          "kernel size must be odd and >= 3");
  require(grid >= 1, ErrorCode::kInvalidArgument, "shuffle grid must be >= 1");
  require(patches_per_image >= 0, ErrorCode::kInvalidArgument, "patch count must be >= 0");
  if (sigma) require(*sigma > 0.0, ErrorCode::kInvalidArgument, "sigma must be positive");
}

img::GrayImage paste_patches(const img::GrayImage& image, const img::BinaryMask& mask,
                             const lesion::PatchBank& bank, int count, std::uint64_t seed,
                             PasteMode mode) {
  require(mask.matches(image), ErrorCode::kShapeMismatch, "mask and image dimensions differ");
  require(count >= 0, ErrorCode::kInvalidArgument, "patch count must be >= 0");
  img::GrayImage out = image;
  if (count == 0) return out;
  require(bank.count() > 0, ErrorCode::kEmptyBank, "patch bank is empty");

  std::vector<std::pair<int, int>> lung;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y)) lung.emplace_back(x, y);
    }
  }
  require(!lung.empty(), ErrorCode::kEmptyMask, "lung mask has no true pixels");

  Rng rng(seed);
  for (int k = 0; k < count; ++k) {
    const auto& patch = bank.patches[rng.index(bank.count())];
    const auto [cx, cy] = lung[rng.index(lung.size())];
    const int x0 = cx - patch.width() / 2;
    const int y0 = cy - patch.height() / 2;
    for (int py = 0; py < patch.height(); ++py) {
      const int y = y0 + py;
      if (y < 0 || y >= out.height()) continue;
      for (int px = 0; px < patch.width(); ++px) {
        const int x = x0 + px;
        if (x < 0 || x >= out.width() || !mask.at(x, y)) continue;
        const std::uint8_t v = patch.pixels.at(px, py);
        out.at(x, y) = mode == PasteMode::kReplace ? v : std::max(out.at(x, y), v);
      }
    }
  }
  return out;
}

double resolve_sigma(int kernel_size, std::optional<double> sigma) {
  if (sigma && *sigma > 0.0) return *sigma;
  return 0.3 * ((kernel_size - 1) * 0.5 - 1.0) + 0.8;
}

std::vector<double> gaussian_kernel(int kernel_size, std::optional<double> sigma) {
  require(kernel_size >= 1 && kernel_size % 2 == 1, ErrorCode::kInvalidArgument,
          "Gaussian kernel size must be odd, got " + std::to_string(kernel_size));
  const double s = resolve_sigma(kernel_size, sigma);
  const int r = kernel_size / 2;
  std::vector<double> w(static_cast<std::size_t>(kernel_size));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * s * s));
    w[static_cast<std::size_t>(i + r)] = v;
    sum += v;
  }
  for (double& v : w) v /= sum;
  return w;
}

namespace {

int reflect101(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

std::vector<double> gaussian_blur_real(const img::GrayImage& image, int kernel_size,
                                       std::optional<double> sigma) {
  const auto kernel = gaussian_kernel(kernel_size, sigma);
  const int r = kernel_size / 2;
  const int w = image.width(), h = image.height();
  const auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x); };

  std::vector<double> rows(image.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) {
        acc += kernel[static_cast<std::size_t>(k + r)] * image.at(reflect101(x + k, w), y);
      }
      rows[idx(x, y)] = acc;
    }
  }
  std::vector<double> out(image.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) {
        acc += kernel[static_cast<std::size_t>(k + r)] * rows[idx(x, reflect101(y + k, h))];
      }
      out[idx(x, y)] = acc;
    }
  }
  return out;
}

img::GrayImage gaussian_blur(const img::GrayImage& image, int kernel_size, std::optional<double> sigma) {
  const auto real = gaussian_blur_real(image, kernel_size, sigma);
  img::GrayImage out(image.width(), image.height());
  auto px = out.pixels();
  for (std::size_t i = 0; i < real.size(); ++i) px[i] = img::quantize(real[i]);
  return out;
}

img::GrayImage local_shuffle(const img::GrayImage& image, int grid, std::uint64_t seed) {
  require(grid >= 1 && grid <= std::min(image.width(), image.height()), ErrorCode::kInvalidArgument,
          "shuffle grid " + std::to_string(grid) + " exceeds image size");
  const int bw = image.width() / grid;
  const int bh = image.height() / grid;
  img::GrayImage out = image;
  Rng rng(seed);
  std::vector<std::pair<int, int>> coords;
  std::vector<std::uint8_t> values;
  for (int by = 0; by < grid; ++by) {
    const int y0 = by * bh;
    const int y1 = by == grid - 1 ? image.height() : y0 + bh;
    for (int bx = 0; bx < grid; ++bx) {
      const int x0 = bx * bw;
      const int x1 = bx == grid - 1 ? image.width() : x0 + bw;
      coords.clear();
      values.clear();
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          coords.emplace_back(x, y);
          values.push_back(image.at(x, y));
        }
      }
      for (std::size_t i = values.size(); i > 1; --i) {
        std::swap(values[i - 1], values[rng.index(i)]);
      }
      for (std::size_t i = 0; i < coords.size(); ++i) out.at(coords[i].first, coords[i].second) = values[i];
    }
  }
  return out;
}

img::GrayImage corrupt_image(const img::GrayImage& image, const img::BinaryMask* mask,
                             const lesion::PatchBank* bank, const CorruptionSpec& spec,
                             std::uint64_t seed) {
  spec.validate();
  switch (spec.strategy) {
    case Strategy::kPerlin:
      require(mask != nullptr, ErrorCode::kEmptyMask, "Perlin strategy needs a lung mask");
      require(bank != nullptr, ErrorCode::kEmptyBank, "Perlin strategy needs a patch bank");
      return paste_patches(image, *mask, *bank, spec.patches_per_image, seed, spec.paste_mode);
    case Strategy::kGaussian:
      return gaussian_blur(image, spec.kernel_size, spec.sigma);
    case Strategy::kShuffle:
      return local_shuffle(image, spec.grid, seed);
  }
  return image;
}

DatasetManifest generate_dataset(const DatasetRequest& request) {
  const auto& spec = request.spec;
  spec.validate();
  require(!request.normals.empty(), ErrorCode::kEmptyInput, "no normal images given");
  require(request.masks.empty() || request.masks.size() == request.normals.size(),
          ErrorCode::kInvalidArgument, "mask list must be empty or match the normal images");
  const bool perlin = spec.strategy == Strategy::kPerlin;
  if (perlin) {
    require(request.bank != nullptr && request.bank->count() > 0, ErrorCode::kEmptyBank,
            "Perlin strategy needs a non-empty patch bank");
  }
  fs::create_directories(request.out_dir);

  const std::size_t n = request.normals.size();
  std::vector<std::optional<img::GrayImage>> images(n);
  std::vector<std::optional<img::BinaryMask>> masks(n);

  DatasetManifest manifest;
  manifest.spec = spec;
  manifest.entries.reserve(request.count);
  for (std::size_t i = 0; i < request.count; ++i) {
    const std::size_t src = i % n;
    if (!images[src]) images[src] = img::load_image(request.normals[src]);
    const img::GrayImage& normal = *images[src];
    if (perlin && !masks[src]) {
      masks[src] = request.masks.empty() ? img::derive_lung_mask(normal, spec.mask_threshold)
                                         : img::load_mask(request.masks[src]);
      require(masks[src]->matches(normal), ErrorCode::kShapeMismatch,
              "mask does not match image " + request.normals[src].string());
      require(masks[src]->any(), ErrorCode::kEmptyMask,
              "empty lung mask for " + request.normals[src].string());
    }
    const auto pseudo = corrupt_image(normal, perlin ? &*masks[src] : nullptr, request.bank, spec,
                                      spec.seed + i);
    char name[32];
    std::snprintf(name, sizeof(name), "pseudo_%05zu.png", i);
    const fs::path out_path = request.out_dir / name;
    img::save_image(pseudo, out_path);
    manifest.entries.push_back({out_path, request.normals[src], std::nullopt});
  }
  if (!request.manifest_path.empty()) write_manifest(manifest, request.manifest_path);
  return manifest;
}

}  // namespace plr::corrupt
