#include "plr/lesionbank.hpp"

#include <array>
#include <cstring>

#include "binio.hpp"
#include "plr/error.hpp"
#include "plr/rng.hpp"

namespace plr::lesion {

namespace {

constexpr std::array<char, 4> kMagic = {'P', 'L', 'R', 'B'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMinAttemptsBeforeGiveUp = 1'000'000;

}  // namespace

double mean_intensity(const img::GrayImage& patch) {
  std::uint64_t sum = 0;
  for (auto p : patch.pixels()) sum += p;
  return static_cast<double>(sum) / static_cast<double>(patch.size());
}

LesionPatch sample_patch(const img::GrayImage& noise_img, std::uint64_t seed, SizeRange size) {
  require(size.min >= 1 && size.min <= size.max, ErrorCode::kInvalidArgument, "invalid patch size range");
  require(noise_img.width() >= size.max && noise_img.height() >= size.max, ErrorCode::kInvalidArgument,
          "noise image smaller than the maximum patch size");
  Rng rng(seed);
  const int w = static_cast<int>(rng.uniform_int(size.min, size.max));
  const int h = static_cast<int>(rng.uniform_int(size.min, size.max));
  const int x0 = static_cast<int>(rng.uniform_int(0, noise_img.width() - w));
  const int y0 = static_cast<int>(rng.uniform_int(0, noise_img.height() - h));

  LesionPatch patch;
  patch.pixels = img::GrayImage(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) patch.pixels.at(x, y) = noise_img.at(x0 + x, y0 + y);
  }
  patch.source_x = x0;
  patch.source_y = y0;
  patch.mean_intensity = mean_intensity(patch.pixels);
  return patch;
}

PatchBank build_bank(std::span<const img::GrayImage> noise_imgs, std::size_t target_count,
                     double threshold, SizeRange size, std::uint64_t seed) {
  require(!noise_imgs.empty(), ErrorCode::kEmptyInput, "at least one noise image is required");
  PatchBank bank;
  bank.params = {size, threshold, seed, static_cast<std::uint32_t>(noise_imgs.size())};
  bank.patches.reserve(target_count);

  std::uint64_t attempts = 0;
  while (bank.patches.size() < target_count) {
    const std::uint64_t candidate_seed = mix_seed(seed, attempts);
    ++attempts;
    Rng pick(candidate_seed);
    const std::size_t source = pick.index(noise_imgs.size());
    LesionPatch patch = sample_patch(noise_imgs[source], mix_seed(candidate_seed, 1), size);
    if (patch.mean_intensity > threshold) {
      patch.source_image = static_cast<std::uint32_t>(source);
      bank.patches.push_back(std::move(patch));
    }
    if (attempts >= kMinAttemptsBeforeGiveUp &&
        static_cast<double>(bank.patches.size()) < static_cast<double>(attempts) * 1e-6) {
      fail(ErrorCode::kAttemptsExhausted,
           "accepted " + std::to_string(bank.patches.size()) + " of " + std::to_string(attempts) +
               " candidates; threshold " + std::to_string(threshold) +
               " is incompatible with the noise images");
    }
  }
  return bank;
}

std::vector<std::uint8_t> encode_bank(const PatchBank& bank) {
  binio::Writer w;
  w.put_bytes(kMagic.data(), kMagic.size());
  w.put(kVersion);
  w.put(static_cast<std::int32_t>(bank.params.size.min));
  w.put(static_cast<std::int32_t>(bank.params.size.max));
  w.put(bank.params.threshold);
  w.put(bank.params.seed);
  w.put(bank.params.source_count);
  w.put(static_cast<std::uint64_t>(bank.patches.size()));
  for (const auto& p : bank.patches) {
    w.put(static_cast<std::uint32_t>(p.width()));
    w.put(static_cast<std::uint32_t>(p.height()));
    w.put(p.source_image);
    w.put(static_cast<std::int32_t>(p.source_x));
    w.put(static_cast<std::int32_t>(p.source_y));
    w.put(p.mean_intensity);
    w.put_bytes(p.pixels.pixels().data(), p.pixels.size());
  }
  return w.bytes();
}

PatchBank decode_bank(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  binio::Reader r(bytes, name);
  std::array<char, 4> magic{};
  r.get_bytes(magic.data(), magic.size());
  require(magic == kMagic, ErrorCode::kCorruptFile, name + ": not a patch bank (bad magic)");
  const auto version = r.get<std::uint32_t>();
  require(version == kVersion, ErrorCode::kVersionMismatch,
          name + ": unsupported bank version " + std::to_string(version));

  PatchBank bank;
  bank.params.size.min = r.get<std::int32_t>();
  bank.params.size.max = r.get<std::int32_t>();
  bank.params.threshold = r.get<double>();
  bank.params.seed = r.get<std::uint64_t>();
  bank.params.source_count = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  // Every record carries at least 32 header bytes; reject absurd counts before reserving.
  require(count <= r.remaining() / 32, ErrorCode::kCorruptFile, name + ": truncated file");
  bank.patches.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    LesionPatch p;
    const auto w = r.get<std::uint32_t>();
    const auto h = r.get<std::uint32_t>();
    require(w > 0 && h > 0 && w <= 4096 && h <= 4096, ErrorCode::kCorruptFile,
            name + ": invalid patch dimensions");
    p.source_image = r.get<std::uint32_t>();
    p.source_x = r.get<std::int32_t>();
    p.source_y = r.get<std::int32_t>();
    p.mean_intensity = r.get<double>();
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h);
    r.get_bytes(px.data(), px.size());
    p.pixels = img::GrayImage(static_cast<int>(w), static_cast<int>(h), std::move(px));
    bank.patches.push_back(std::move(p));
  }
  require(r.remaining() == 0, ErrorCode::kCorruptFile, name + ": trailing bytes after last patch");
  return bank;
}

void save_bank(const PatchBank& bank, const std::filesystem::path& path) {
  binio::write_all(path.string(), encode_bank(bank));
}

PatchBank load_bank(const std::filesystem::path& path) {
  return decode_bank(binio::read_all(path.string()), path.string());
}

}  // namespace plr::lesion
