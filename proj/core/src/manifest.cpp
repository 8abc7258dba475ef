#include "plr/manifest.hpp"

#include <fstream>
#include <string>

#include <json.hpp>

#include "json_io.hpp"
#include "plr/error.hpp"

namespace plr::corrupt {

namespace fs = std::filesystem;

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

bool DatasetManifest::is_restoration() const {
  return !entries.empty() && entries.front().target.has_value();
}

bool DatasetManifest::is_classification() const {
  return !entries.empty() && entries.front().label.has_value();
}

void DatasetManifest::validate() const {
  const bool restoration = is_restoration();
  for (const auto& e : entries) {
    require(e.target.has_value() != e.label.has_value(), ErrorCode::kInvalidArgument,
            "manifest entry must carry exactly one of target or label: " + e.input.string());
    require(e.target.has_value() == restoration, ErrorCode::kInvalidArgument,
            "manifest mixes restoration and classification entries");
    if (e.label) {
      require(*e.label == 0 || *e.label == 1, ErrorCode::kInvalidArgument,
              "labels must be 0 or 1: " + e.input.string());
    }
  }
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  manifest.validate();
  const fs::path base = fs::absolute(path).parent_path();
  auto relative = [&](const fs::path& p) {
    require(fs::exists(p), ErrorCode::kIo, "manifest references a missing file: " + p.string());
    return fs::absolute(p).lexically_normal().lexically_relative(base).generic_string();
  };

  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  for (const auto& e : manifest.entries) {
    nlohmann::ordered_json line;
    line["input"] = relative(e.input);
    if (e.target) line["target"] = relative(*e.target);
    if (e.label) line["label"] = *e.label;
    out << line.dump() << '\n';
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());

  if (manifest.spec) {
    nlohmann::ordered_json meta;
    meta["split"] = std::string(to_string(manifest.split));
    meta["count"] = manifest.entries.size();
    meta["corruption"] = detail::to_json(*manifest.spec);
    std::ofstream side(path.string() + ".meta.json", std::ios::binary);
    require(static_cast<bool>(side), ErrorCode::kIo, "cannot write manifest sidecar for " + path.string());
    side << meta.dump(2) << '\n';
  }
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open manifest " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  auto resolve = [&](const std::string& s) {
    fs::path p(s);
    return p.is_absolute() ? p : (base / p).lexically_normal();
  };

  DatasetManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kCorruptFile, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    require(obj.is_object() && obj.contains("input") && obj["input"].is_string(), ErrorCode::kCorruptFile,
            path.string() + ":" + std::to_string(line_no) + ": entry needs a string \"input\"");
    for (const auto& item : obj.items()) {
      require(item.key() == "input" || item.key() == "target" || item.key() == "label",
              ErrorCode::kCorruptFile,
              path.string() + ":" + std::to_string(line_no) + ": unknown key \"" + item.key() + "\"");
    }
    ManifestEntry e;
    e.input = resolve(obj["input"].get<std::string>());
    if (obj.contains("target")) e.target = resolve(obj["target"].get<std::string>());
    if (obj.contains("label")) {
      require(obj["label"].is_number_integer(), ErrorCode::kCorruptFile,
              path.string() + ":" + std::to_string(line_no) + ": label must be an integer");
      e.label = obj["label"].get<int>();
    }
    manifest.entries.push_back(std::move(e));
  }
  manifest.validate();

  const fs::path meta_path = path.string() + ".meta.json";
  if (fs::exists(meta_path)) {
    std::ifstream side(meta_path);
    const auto meta = nlohmann::json::parse(side, nullptr, false);
    if (meta.is_object() && meta.contains("corruption")) {
      manifest.spec = detail::corruption_spec_from_json(meta["corruption"]);
    }
    if (meta.is_object() && meta.contains("split")) {
      const auto s = meta["split"].get<std::string>();
      manifest.split = s == "val" ? Split::kVal : s == "test" ? Split::kTest : Split::kTrain;
    }
  }
  return manifest;
}

}  // namespace plr::corrupt
