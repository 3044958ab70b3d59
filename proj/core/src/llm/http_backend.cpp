#include "failopt/llm/http_backend.hpp"

#include <cstdlib>

#include <nlohmann/json.hpp>

#include "failopt/error.hpp"

namespace failopt::llm {

HttpChatBackend::HttpChatBackend(HttpBackendConfig config)
    : config_(std::move(config)), endpoint_(net::Endpoint::parse(config_.base_url)) {
  if (config_.model.empty()) throw Error(Errc::Config, "HTTP backend needs a model name");
}

std::string HttpChatBackend::id() const { return "http:" + config_.base_url + "#" + config_.model; }

std::string HttpChatBackend::request_body(const std::string& prompt,
                                          const GenerationParams& params) const {
  nlohmann::json body = {{"model", config_.model},
                         {"messages", {{{"role", "user"}, {"content", prompt}}}},
                         {"temperature", params.temperature},
                         {"max_tokens", params.max_tokens}};
  if (params.seed) body["seed"] = *params.seed;
  return body.dump();
}

std::string HttpChatBackend::complete(const std::string& prompt, const GenerationParams& params,
                                      int /*sample_index*/) const {
  net::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
  }
  const auto res = net::post_json_with_retry(endpoint_, "/chat/completions",
                                             request_body(prompt, params), config_.timeout,
                                             config_.retry, headers);
  if (!res.ok()) {
    const auto detail = res.transport_ok ? "HTTP " + std::to_string(res.status) : res.error;
    const auto code = res.retryable() ? Errc::BackendTimeout : Errc::Backend;
    throw Error(code, "chat completion failed after " + std::to_string(res.attempts) +
                          " attempt(s): " + detail);
  }
  try {
    const auto j = nlohmann::json::parse(res.body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string() : content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaMismatch, std::string("unexpected chat completion payload: ") + e.what());
  }
}

}  // namespace failopt::llm
