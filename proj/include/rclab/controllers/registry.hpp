#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "rclab/engine/policy_engine.hpp"

namespace rclab::controllers {

/// Builds a native controller by registry name: "iterate3", "minstrel" or
/// "hold-retest". Parameters are optional JSON overrides of the defaults.
/// Throws std::invalid_argument for unknown names or bad parameters.
std::shared_ptr<RateController> make_controller(const std::string& name, const nlohmann::json& params = {});

std::vector<std::string> controller_names();

}  // namespace rclab::controllers
