#pragma once

#include <array>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "failopt/llm/backend.hpp"

namespace failopt::llm {

struct CacheKey {
  std::string backend_id;
  std::string prompt_hash;    // hex SHA-256 of the prompt
  std::string params_digest;  // hex SHA-256 of canonical(params)
  int sample_index = 0;

  /// Temperature-0 requests collapse onto sample 0.
  static CacheKey make(std::string backend_id, std::string_view prompt,
                       const GenerationParams& params, int sample_index);

  std::string digest() const;
  bool operator==(const CacheKey&) const = default;
};

/// Content-addressed response store, one JSON file per key. Reads may run
/// concurrently; writes to the same key are serialized and land atomically.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  /// Throws CacheCorruption when the entry exists but is unreadable or
  /// belongs to a different key.
  std::optional<std::string> get(const CacheKey& key) const;
  void put(const CacheKey& key, std::string_view response);

  std::filesystem::path path_for(const CacheKey& key) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::mutex& stripe(const std::string& digest) const;

  std::filesystem::path dir_;
  mutable std::array<std::mutex, 64> stripes_;
};

}  // namespace failopt::llm
