#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace fadelab {

// Full configuration with every key defaulted to the standard operating
// point. A user config file and --set overrides are merged over this; unknown
// keys are schema errors.
nlohmann::json default_config();

// Entry point shared by the binary and the tests. Returns the process exit
// status (0 on success).
int run_cli(const std::vector<std::string>& args);

} // namespace fadelab
