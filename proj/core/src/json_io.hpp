#pragma once

// JSON views of config structs, shared by the manifest sidecar, the config
// dump and the run reports. Internal: keeps nlohmann out of public headers.

#include <json.hpp>

#include "plr/corruption_spec.hpp"

namespace plr::detail {

nlohmann::ordered_json to_json(const corrupt::CorruptionSpec& spec);
corrupt::CorruptionSpec corruption_spec_from_json(const nlohmann::json& j);

}  // namespace plr::detail
