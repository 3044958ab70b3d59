#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "failopt/detect/detector.hpp"

namespace failopt::detect {

/// Per-token log-probabilities of a text under a causal LM.
class LogprobBackend {
 public:
  virtual ~LogprobBackend() = default;
  virtual std::string id() const = 0;
  virtual std::vector<double> token_logprobs(const std::string& text) const = 0;
};

struct PerturbationConfig {
  int n_perturbations = 100;
  double mask_fraction = 0.15;
  int span_tokens = 2;
};

/// Mask-and-fill rewrites of a text.
class PerturbBackend {
 public:
  virtual ~PerturbBackend() = default;
  virtual std::string id() const = 0;
  virtual std::vector<std::string> perturb(const std::string& text, const PerturbationConfig& cfg,
                                           std::uint64_t seed) const = 0;
};

/// exp(-mean log p). Throws DegenerateText when nothing is scored and
/// NonFinite for non-finite log-probabilities.
double perplexity(const LogprobBackend& lm, const std::string& text);

/// Mean per-token log-probability.
double mean_logprob(const LogprobBackend& lm, const std::string& text);

/// mean_logprob(text) minus the average mean_logprob over perturbations.
/// Perturbations identical to the text are discarded; PerturbationFailure
/// when none remain.
double perturbation_discrepancy(const LogprobBackend& lm, const PerturbBackend& perturber,
                                const std::string& text, const PerturbationConfig& cfg,
                                std::uint64_t seed);

/// ai_score = -perplexity.
class PerplexityDetector final : public Detector {
 public:
  explicit PerplexityDetector(std::shared_ptr<const LogprobBackend> lm);
  std::string id() const override;
  DetectorScore score(const std::string& text) const override;
  bool probabilistic() const override { return false; }

 private:
  std::shared_ptr<const LogprobBackend> lm_;
};

/// ai_score = perturbation discrepancy; the seed is derived from the text.
class DiscrepancyDetector final : public Detector {
 public:
  DiscrepancyDetector(std::shared_ptr<const LogprobBackend> lm,
                      std::shared_ptr<const PerturbBackend> perturber, PerturbationConfig cfg,
                      std::uint64_t seed);
  std::string id() const override;
  DetectorScore score(const std::string& text) const override;
  bool probabilistic() const override { return false; }

 private:
  std::shared_ptr<const LogprobBackend> lm_;
  std::shared_ptr<const PerturbBackend> perturber_;
  PerturbationConfig cfg_;
  std::uint64_t seed_;
};

/// Every whitespace token has probability 1/vocab_size.
class UniformLM final : public LogprobBackend {
 public:
  explicit UniformLM(std::size_t vocab_size);
  std::string id() const override;
  std::vector<double> token_logprobs(const std::string& text) const override;

 private:
  std::size_t vocab_size_;
};

/// Add-one smoothed unigram model over whitespace tokens, with one extra
/// slot for unseen tokens.
class UnigramLM final : public LogprobBackend {
 public:
  explicit UnigramLM(std::span<const std::string> corpus);
  std::string id() const override { return "unigram"; }
  std::vector<double> token_logprobs(const std::string& text) const override;

 private:
  std::unordered_map<std::string, double> logp_;
  double unseen_logp_ = 0.0;
};

/// Replaces random token spans with draws from a fill vocabulary.
class SpanPerturber final : public PerturbBackend {
 public:
  explicit SpanPerturber(std::vector<std::string> fill_vocabulary);
  std::string id() const override { return "span"; }
  std::vector<std::string> perturb(const std::string& text, const PerturbationConfig& cfg,
                                   std::uint64_t seed) const override;

 private:
  std::vector<std::string> fill_;
};

}  // namespace failopt::detect
