#pragma once

#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "plr/corruption_spec.hpp"

namespace plr::corrupt {

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split s);

struct ManifestEntry {
  std::filesystem::path input;
  std::optional<std::filesystem::path> target;  // restoration pairs
  std::optional<int> label;                     // classification samples, 0 or 1

  bool operator==(const ManifestEntry&) const = default;
};

/// Paired samples exchanged between data generation and training.
///
/// On disk this is JSON Lines, one object per entry with keys
/// {"input","target"} or {"input","label"}. Paths are written relative to
/// the manifest's directory and resolved against it on read. When a
/// generation spec is attached it goes to a "<manifest>.meta.json" sidecar.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::optional<CorruptionSpec> spec;
  Split split = Split::kTrain;

  bool is_restoration() const;
  bool is_classification() const;
  /// Throws unless every entry is of the same kind and labels are 0/1.
  void validate() const;
};

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace plr::corrupt
