#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace failopt::net {

/// "http://host:port/prefix" split into the connection part and a path prefix.
struct Endpoint {
  std::string scheme_host_port;
  std::string path_prefix;

  static Endpoint parse(std::string_view url);
  std::string path(std::string_view route) const;
};

struct PostResult {
  bool transport_ok = false;
  int status = 0;
  std::string body;
  std::string error;  // transport error text when !transport_ok
  int attempts = 0;

  bool ok() const noexcept { return transport_ok && status >= 200 && status < 300; }
  bool retryable() const noexcept { return !transport_ok || status == 429 || status >= 500; }
};

using Headers = std::vector<std::pair<std::string, std::string>>;

/// Backoff schedule for transport failures, 429 and 5xx responses.
struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  std::chrono::milliseconds max_delay{30000};
  double jitter = 0.25;  // fractional spread around each delay

  std::chrono::milliseconds delay_before(int attempt, std::uint64_t salt) const;
};

/// One POST of a JSON body. Throws Transport while a BlockScope is alive.
PostResult post_json(const Endpoint& endpoint, std::string_view route, const std::string& body,
                     std::chrono::milliseconds timeout, const Headers& headers = {});

/// post_json repeated per `policy` until a non-retryable outcome or the last attempt.
PostResult post_json_with_retry(const Endpoint& endpoint, std::string_view route,
                                const std::string& body, std::chrono::milliseconds timeout,
                                const RetryPolicy& policy, const Headers& headers = {});

/// Number of outbound requests attempted by this process (blocked ones included).
std::uint64_t call_count() noexcept;

/// While any instance is alive, outbound requests fail with Transport.
class BlockScope {
 public:
  BlockScope();
  ~BlockScope();
  BlockScope(const BlockScope&) = delete;
  BlockScope& operator=(const BlockScope&) = delete;
};

bool blocked() noexcept;

}  // namespace failopt::net
