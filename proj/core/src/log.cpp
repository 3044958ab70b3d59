#include "log.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_sinks.h>

#include "failopt/error.hpp"
#include "failopt/logging.hpp"

namespace failopt {
namespace detail {

spdlog::logger& log() {
  static const auto logger = [] {
    auto l = std::make_shared<spdlog::logger>("failopt", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    const char* env = std::getenv("FAILOPT_LOG_LEVEL");
    l->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
    l->set_pattern("[%Y-%m-%d %H:%M:%S] [%l] %v");
    return l;
  }();
  return *logger;
}

}  // namespace detail

void set_log_level(std::string_view level) {
  const auto parsed = spdlog::level::from_str(std::string(level));
  if (parsed == spdlog::level::off && level != "off") {
    throw Error(Errc::Config, "unknown log level '" + std::string(level) + "'");
  }
  detail::log().set_level(parsed);
}

namespace {
std::shared_ptr<spdlog::sinks::sink> g_file_sink;
}  // namespace

void clear_log_file() {
  if (!g_file_sink) return;
  auto& sinks = detail::log().sinks();
  sinks.erase(std::remove(sinks.begin(), sinks.end(), g_file_sink), sinks.end());
  g_file_sink.reset();
}

void set_log_file(const std::filesystem::path& path) {
  clear_log_file();
  try {
    g_file_sink = std::make_shared<spdlog::sinks::basic_file_sink_mt>(path.string());
  } catch (const spdlog::spdlog_ex& e) {
    throw Error(Errc::Io, "cannot open log file " + path.string() + ": " + e.what());
  }
  g_file_sink->set_pattern("[%Y-%m-%d %H:%M:%S] [%l] %v");
  detail::log().sinks().push_back(g_file_sink);
}

}  // namespace failopt
