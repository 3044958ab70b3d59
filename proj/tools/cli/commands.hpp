#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "failopt/error.hpp"
#include "run_config.hpp"

namespace failopt::cli {

enum class TestbedMode { Attack, Defense };

/// Exit statuses: 0 success, 1 internal, 2 config, 3 data, 4 backend.
int exit_code(ErrorCategory category) noexcept;

/// {"error": {code, category, exit_code, message}}
nlohmann::json error_json(Errc code, const std::string& message);

/// Finds a scenario by file path, then as <name>.json under ./scenarios,
/// $FAILOPT_SCENARIO_DIR and the source tree.
std::filesystem::path resolve_scenario(const std::string& name_or_path);

// Each command expects the run directory and config snapshot to exist already.
void cmd_optimize(const RunConfig& cfg, bool resume);
void cmd_eval(const RunConfig& cfg);
void cmd_augment(const RunConfig& cfg);
void cmd_probe(const RunConfig& cfg);
void cmd_testbed(const RunConfig& cfg, TestbedMode mode);

/// Full command line handling; returns the exit status. args[0] is the program name.
int run(const std::vector<std::string>& args);

}  // namespace failopt::cli
