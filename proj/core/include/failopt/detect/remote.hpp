#pragma once

#include <chrono>
#include <string>

#include <nlohmann/json.hpp>

#include "failopt/detect/detector.hpp"
#include "failopt/detect/lm.hpp"
#include "failopt/net.hpp"

namespace failopt::detect {

struct RemoteConfig {
  std::string base_url;
  std::chrono::milliseconds timeout{30000};
  net::RetryPolicy retry;
  std::size_t batch_size = 32;
  std::string token_env;  // optional bearer token variable
};

/// Shared POST-and-parse path of the remote clients. Throws Transport when the
/// service cannot be reached, Backend for a non-retryable HTTP status and
/// SchemaMismatch for a body that is not JSON.
nlohmann::json post_remote(const RemoteConfig& cfg, const net::Endpoint& endpoint,
                           std::string_view route, const nlohmann::json& body);

/// POST /score {texts} -> {scores}, in batches of cfg.batch_size.
class RemoteDetector final : public Detector {
 public:
  explicit RemoteDetector(RemoteConfig cfg);
  std::string id() const override { return "remote:" + cfg_.base_url; }
  DetectorScore score(const std::string& text) const override;
  std::vector<DetectorScore> score_batch(std::span<const std::string> texts) const override;
  bool probabilistic() const override { return true; }

 private:
  RemoteConfig cfg_;
  net::Endpoint endpoint_;
};

/// POST /logprob {text} -> {tokens, logprobs}.
class RemoteLogprobBackend final : public LogprobBackend {
 public:
  explicit RemoteLogprobBackend(RemoteConfig cfg);
  std::string id() const override { return "remote:" + cfg_.base_url; }
  std::vector<double> token_logprobs(const std::string& text) const override;

 private:
  RemoteConfig cfg_;
  net::Endpoint endpoint_;
};

/// POST /perturb {text, n, mask_fraction, span_tokens, seed} -> {perturbations}.
class RemotePerturbBackend final : public PerturbBackend {
 public:
  explicit RemotePerturbBackend(RemoteConfig cfg);
  std::string id() const override { return "remote:" + cfg_.base_url; }
  std::vector<std::string> perturb(const std::string& text, const PerturbationConfig& pcfg,
                                   std::uint64_t seed) const override;

 private:
  RemoteConfig cfg_;
  net::Endpoint endpoint_;
};

}  // namespace failopt::detect
