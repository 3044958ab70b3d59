#include "failopt/detect/remote.hpp"

#include <cmath>
#include <cstdlib>

#include "failopt/error.hpp"

namespace failopt::detect {

nlohmann::json post_remote(const RemoteConfig& cfg, const net::Endpoint& endpoint,
                           std::string_view route, const nlohmann::json& body) {
  net::Headers headers;
  if (!cfg.token_env.empty()) {
    if (const char* t = std::getenv(cfg.token_env.c_str()); t && *t) {
      headers.emplace_back("Authorization", std::string("Bearer ") + t);
    }
  }
  const auto res = net::post_json_with_retry(endpoint, route, body.dump(), cfg.timeout, cfg.retry, headers);
  if (!res.transport_ok) {
    throw Error(Errc::Transport, std::string(route) + ": " + res.error);
  }
  if (!res.ok()) {
    const auto code = res.retryable() ? Errc::Transport : Errc::Backend;
    throw Error(code, std::string(route) + ": HTTP " + std::to_string(res.status) + " " + res.body);
  }
  try {
    return nlohmann::json::parse(res.body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaMismatch, std::string(route) + ": response is not JSON: " + e.what());
  }
}

RemoteDetector::RemoteDetector(RemoteConfig cfg)
    : cfg_(std::move(cfg)), endpoint_(net::Endpoint::parse(cfg_.base_url)) {
  if (cfg_.batch_size == 0) throw Error(Errc::Config, "remote batch size must be positive");
}

DetectorScore RemoteDetector::score(const std::string& text) const {
  return score_batch(std::span<const std::string>(&text, 1)).front();
}

std::vector<DetectorScore> RemoteDetector::score_batch(std::span<const std::string> texts) const {
  std::vector<DetectorScore> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += cfg_.batch_size) {
    const auto chunk = texts.subspan(start, std::min(cfg_.batch_size, texts.size() - start));
    const auto j = post_remote(cfg_, endpoint_, "/score",
                               {{"texts", std::vector<std::string>(chunk.begin(), chunk.end())}});
    if (!j.is_object() || !j.contains("scores") || !j.at("scores").is_array()) {
      throw Error(Errc::SchemaMismatch, "/score: missing 'scores' array");
    }
    const auto& scores = j.at("scores");
    if (scores.size() != chunk.size()) {
      throw Error(Errc::SchemaMismatch, "/score: expected " + std::to_string(chunk.size()) +
                                            " scores, got " + std::to_string(scores.size()));
    }
    for (const auto& s : scores) {
      if (!s.is_number()) throw Error(Errc::SchemaMismatch, "/score: non-numeric score");
      const double v = s.get<double>();
      if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::SchemaMismatch, "/score: score outside [0, 1]");
      out.push_back({v, v, id()});
    }
  }
  return out;
}

RemoteLogprobBackend::RemoteLogprobBackend(RemoteConfig cfg)
    : cfg_(std::move(cfg)), endpoint_(net::Endpoint::parse(cfg_.base_url)) {}

std::vector<double> RemoteLogprobBackend::token_logprobs(const std::string& text) const {
  const auto j = post_remote(cfg_, endpoint_, "/logprob", {{"text", text}});
  try {
    const auto tokens = j.at("tokens");
    auto lps = j.at("logprobs").get<std::vector<double>>();
    if (!tokens.is_array() || tokens.size() != lps.size()) {
      throw Error(Errc::SchemaMismatch, "/logprob: tokens and logprobs differ in length");
    }
    for (const double lp : lps) {
      if (!(lp <= 0.0)) throw Error(Errc::SchemaMismatch, "/logprob: log-probability above 0 or NaN");
    }
    return lps;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaMismatch, std::string("/logprob: ") + e.what());
  }
}

RemotePerturbBackend::RemotePerturbBackend(RemoteConfig cfg)
    : cfg_(std::move(cfg)), endpoint_(net::Endpoint::parse(cfg_.base_url)) {}

std::vector<std::string> RemotePerturbBackend::perturb(const std::string& text, const PerturbationConfig& pcfg,
                                                       std::uint64_t seed) const {
  const nlohmann::json body = {{"text", text},
                               {"n", pcfg.n_perturbations},
                               {"mask_fraction", pcfg.mask_fraction},
                               {"span_tokens", pcfg.span_tokens},
                               {"seed", seed}};
  const auto j = post_remote(cfg_, endpoint_, "/perturb", body);
  try {
    auto out = j.at("perturbations").get<std::vector<std::string>>();
    if (out.size() != static_cast<std::size_t>(pcfg.n_perturbations)) {
      throw Error(Errc::SchemaMismatch, "/perturb: expected " + std::to_string(pcfg.n_perturbations) +
                                            " perturbations, got " + std::to_string(out.size()));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaMismatch, std::string("/perturb: ") + e.what());
  }
}

}  // namespace failopt::detect
