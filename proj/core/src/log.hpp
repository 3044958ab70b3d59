#pragma once

#include <spdlog/spdlog.h>

namespace failopt::detail {

/// The library's stderr logger.
spdlog::logger& log();

}  // namespace failopt::detail
