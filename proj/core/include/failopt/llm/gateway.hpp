#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "failopt/error.hpp"
#include "failopt/llm/backend.hpp"
#include "failopt/llm/cache.hpp"

namespace failopt::llm {

struct Request {
  std::string prompt;
  GenerationParams params;
  int sample_index = 0;
};

struct ItemError {
  std::size_t index = 0;
  Errc code = Errc::Backend;
  std::string message;
};

/// Outputs in request order; failed slots are empty and itemized in `errors`.
struct BatchResult {
  std::vector<std::optional<std::string>> outputs;
  std::vector<ItemError> errors;

  bool ok() const noexcept { return errors.empty(); }
  /// All outputs, or the first item's error rethrown.
  std::vector<std::string> values() const;
};

/// Append-only JSONL record of every prompt/response pair.
class TranscriptLog {
 public:
  explicit TranscriptLog(const std::filesystem::path& path);
  void append(const std::string& prompt, const std::string& response,
              const GenerationParams& params, int sample_index, bool cached);

 private:
  std::mutex mu_;
  std::ofstream out_;
};

/// Front door to a chat backend: validation, caching, refusal surfacing,
/// call accounting and bounded fan-out. Thread-safe.
class Gateway {
 public:
  explicit Gateway(std::shared_ptr<const ChatBackend> backend,
                   std::shared_ptr<ResponseCache> cache = nullptr);

  /// Throws EmptyInput for an empty prompt and BackendRefusal for an empty
  /// completion; backend errors propagate. `use_cache = false` skips the
  /// lookup but still stores the fresh response.
  std::string generate(const std::string& prompt, const GenerationParams& params,
                       int sample_index = 0, bool use_cache = true);

  /// Never more than `max_in_flight` requests are outstanding at once.
  BatchResult batch_generate(std::span<const Request> requests, std::size_t max_in_flight);
  BatchResult batch_generate(std::span<const std::string> prompts, const GenerationParams& params,
                             std::size_t max_in_flight);

  void set_transcript(std::shared_ptr<TranscriptLog> log);

  const ChatBackend& backend() const noexcept { return *backend_; }
  std::uint64_t backend_calls() const noexcept { return backend_calls_.load(); }
  std::uint64_t cache_hits() const noexcept { return cache_hits_.load(); }

 private:
  std::shared_ptr<const ChatBackend> backend_;
  std::shared_ptr<ResponseCache> cache_;
  std::shared_ptr<TranscriptLog> transcript_;
  std::atomic<std::uint64_t> backend_calls_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
};

}  // namespace failopt::llm
