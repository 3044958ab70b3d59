#pragma once

#include <filesystem>
#include <string_view>

namespace failopt {

/// Sets the library log level: trace, debug, info, warn, error or off.
/// The initial level comes from FAILOPT_LOG_LEVEL and defaults to warn.
void set_log_level(std::string_view level);

/// Also writes log lines to `path`, appending. Replaces any earlier log file.
void set_log_file(const std::filesystem::path& path);

/// Stops writing to the log file set by set_log_file.
void clear_log_file();

}  // namespace failopt
