#include "failopt/net.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "failopt/error.hpp"
#include "failopt/rng.hpp"

namespace failopt::net {
namespace {

std::atomic<std::uint64_t> g_calls{0};
std::atomic<int> g_blocks{0};

}  // namespace

Endpoint Endpoint::parse(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error(Errc::Config, "endpoint URL needs a scheme: '" + std::string(url) + "'");
  }
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(Errc::Config, "unsupported URL scheme '" + std::string(scheme) + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = std::string(url.substr(0, path_start));
  if (e.scheme_host_port.size() == scheme_end + 3) {
    throw Error(Errc::Config, "endpoint URL has no host: '" + std::string(url) + "'");
  }
  if (path_start != std::string_view::npos) {
    e.path_prefix = std::string(url.substr(path_start));
    while (!e.path_prefix.empty() && e.path_prefix.back() == '/') e.path_prefix.pop_back();
  }
  return e;
}

std::string Endpoint::path(std::string_view route) const {
  std::string out = path_prefix;
  if (route.empty() || route.front() != '/') out += '/';
  out += route;
  return out;
}

std::chrono::milliseconds RetryPolicy::delay_before(int attempt, std::uint64_t salt) const {
  // attempt is the 1-based index of the retry about to happen.
  const double base = static_cast<double>(base_delay.count()) * std::pow(2.0, attempt - 1);
  const double capped = std::min(base, static_cast<double>(max_delay.count()));
  Rng rng(mix64(salt ^ static_cast<std::uint64_t>(attempt)));
  const double spread = 1.0 + jitter * (2.0 * rng.uniform01() - 1.0);
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::max(0.0, capped * spread)));
}

PostResult post_json(const Endpoint& endpoint, std::string_view route, const std::string& body,
                     std::chrono::milliseconds timeout, const Headers& headers) {
  g_calls.fetch_add(1, std::memory_order_relaxed);
  if (blocked()) throw Error(Errc::Transport, "network access is blocked in this scope");

  httplib::Client client(endpoint.scheme_host_port);
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);

  PostResult out;
  out.attempts = 1;
  auto res = client.Post(endpoint.path(route), h, body, "application/json");
  if (!res) {
    out.error = httplib::to_string(res.error());
    return out;
  }
  out.transport_ok = true;
  out.status = res->status;
  out.body = std::move(res->body);
  return out;
}

PostResult post_json_with_retry(const Endpoint& endpoint, std::string_view route,
                                const std::string& body, std::chrono::milliseconds timeout,
                                const RetryPolicy& policy, const Headers& headers) {
  if (policy.max_attempts < 1) throw Error(Errc::Config, "retry policy needs at least one attempt");
  const auto salt = fnv1a64(body);
  PostResult last;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(policy.delay_before(attempt - 1, salt));
    last = post_json(endpoint, route, body, timeout, headers);
    last.attempts = attempt;
    if (!last.retryable()) break;
  }
  return last;
}

std::uint64_t call_count() noexcept { return g_calls.load(std::memory_order_relaxed); }

BlockScope::BlockScope() { g_blocks.fetch_add(1); }
BlockScope::~BlockScope() { g_blocks.fetch_sub(1); }

bool blocked() noexcept { return g_blocks.load() > 0; }

}  // namespace failopt::net
