#pragma once

#include <chrono>
#include <string>

#include "failopt/llm/backend.hpp"
#include "failopt/net.hpp"

namespace failopt::llm {

struct HttpBackendConfig {
  std::string base_url;                     // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";  // unset or empty variable: no auth header
  std::chrono::milliseconds timeout{60000};
  net::RetryPolicy retry;
};

/// OpenAI-compatible POST {base_url}/chat/completions, single user message.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config);

  std::string id() const override;
  std::string complete(const std::string& prompt, const GenerationParams& params,
                       int sample_index) const override;

  /// The JSON request body sent for one completion.
  std::string request_body(const std::string& prompt, const GenerationParams& params) const;

 private:
  HttpBackendConfig config_;
  net::Endpoint endpoint_;
};

}  // namespace failopt::llm
