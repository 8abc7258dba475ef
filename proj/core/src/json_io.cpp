#include "json_io.hpp"

#include "plr/error.hpp"

namespace plr::detail {

nlohmann::ordered_json to_json(const corrupt::CorruptionSpec& spec) {
  nlohmann::ordered_json j;
  j["strategy"] = corrupt::to_string(spec.strategy);
  j["patches_per_image"] = spec.patches_per_image;
  j["kernel_size"] = spec.kernel_size;
  j["sigma"] = spec.sigma ? nlohmann::ordered_json(*spec.sigma) : nlohmann::ordered_json(nullptr);
  j["grid"] = spec.grid;
  j["paste_mode"] = corrupt::to_string(spec.paste_mode);
  j["mask_threshold"] = spec.mask_threshold;
  j["seed"] = spec.seed;
  return j;
}

corrupt::CorruptionSpec corruption_spec_from_json(const nlohmann::json& j) {
  try {
    corrupt::CorruptionSpec spec;
    spec.strategy = corrupt::parse_strategy(j.at("strategy").get<std::string>());
    spec.patches_per_image = j.at("patches_per_image").get<int>();
    spec.kernel_size = j.at("kernel_size").get<int>();
    if (!j.at("sigma").is_null()) spec.sigma = j.at("sigma").get<double>();
    spec.grid = j.at("grid").get<int>();
    spec.paste_mode = corrupt::parse_paste_mode(j.at("paste_mode").get<std::string>());
    spec.mask_threshold = j.at("mask_threshold").get<std::uint8_t>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorruptFile, std::string("corruption spec: ") + e.what());
  }
}

}  // namespace plr::detail
