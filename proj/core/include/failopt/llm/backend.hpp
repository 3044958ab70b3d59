#pragma once

#include <optional>
#include <string>

namespace failopt::llm {

struct GenerationParams {
  double temperature = 1.0;
  int max_tokens = 600;
  std::optional<long long> seed;

  bool operator==(const GenerationParams&) const = default;
};

/// Canonical text form of the params, hashed into cache keys.
std::string canonical(const GenerationParams& params);

/// A single-turn chat completion source. Implementations must be safe to call
/// from several threads at once.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  /// Stable identifier that namespaces cache entries.
  virtual std::string id() const = 0;

  /// `sample_index` tells repeated stochastic draws of one prompt apart.
  virtual std::string complete(const std::string& prompt, const GenerationParams& params,
                               int sample_index) const = 0;
};

}  // namespace failopt::llm
