#include "failopt/detect/lm.hpp"

#include <cmath>
#include <numeric>

#include "failopt/corpus/text.hpp"
#include "failopt/error.hpp"
#include "failopt/rng.hpp"

namespace failopt::detect {
namespace {

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& s : corpus::WhitespaceTokenizer().spans(text)) {
    out.push_back(text.substr(s.begin, s.end - s.begin));
  }
  return out;
}

}  // namespace

double mean_logprob(const LogprobBackend& lm, const std::string& text) {
  const auto lps = lm.token_logprobs(text);
  if (lps.empty()) throw Error(Errc::DegenerateText, "no scorable tokens");
  double sum = 0.0;
  for (double lp : lps) {
    if (!std::isfinite(lp)) throw Error(Errc::NonFinite, "non-finite token log-probability from " + lm.id());
    sum += lp;
  }
  return sum / static_cast<double>(lps.size());
}

double perplexity(const LogprobBackend& lm, const std::string& text) {
  return std::exp(-mean_logprob(lm, text));
}

double perturbation_discrepancy(const LogprobBackend& lm, const PerturbBackend& perturber,
                                const std::string& text, const PerturbationConfig& cfg,
                                std::uint64_t seed) {
  if (cfg.n_perturbations < 1) throw Error(Errc::Config, "n_perturbations must be positive");
  if (!(cfg.mask_fraction > 0.0 && cfg.mask_fraction < 1.0)) {
    throw Error(Errc::Config, "mask_fraction must lie in (0, 1)");
  }
  if (cfg.span_tokens < 1) throw Error(Errc::Config, "span_tokens must be positive");
  const auto n_tokens = corpus::count_tokens(text);
  if (cfg.mask_fraction * static_cast<double>(n_tokens) < 1.0) {
    throw Error(Errc::DegenerateText, "text too short to mask a span");
  }
  const double original = mean_logprob(lm, text);
  double sum = 0.0;
  std::size_t kept = 0;
  for (const auto& p : perturber.perturb(text, cfg, seed)) {
    if (p == text) continue;
    sum += mean_logprob(lm, p);
    ++kept;
  }
  if (kept == 0) throw Error(Errc::PerturbationFailure, "every perturbation reproduced the original text");
  return original - sum / static_cast<double>(kept);
}

PerplexityDetector::PerplexityDetector(std::shared_ptr<const LogprobBackend> lm) : lm_(std::move(lm)) {
  if (!lm_) throw Error(Errc::Config, "perplexity detector needs an LM");
}

std::string PerplexityDetector::id() const { return "perplexity:" + lm_->id(); }

DetectorScore PerplexityDetector::score(const std::string& text) const {
  const double ppl = perplexity(*lm_, text);
  return {-ppl, ppl, id()};
}

DiscrepancyDetector::DiscrepancyDetector(std::shared_ptr<const LogprobBackend> lm,
                                         std::shared_ptr<const PerturbBackend> perturber,
                                         PerturbationConfig cfg, std::uint64_t seed)
    : lm_(std::move(lm)), perturber_(std::move(perturber)), cfg_(cfg), seed_(seed) {
  if (!lm_ || !perturber_) throw Error(Errc::Config, "discrepancy detector needs an LM and a perturber");
}

std::string DiscrepancyDetector::id() const {
  return "discrepancy:" + lm_->id() + "+" + perturber_->id();
}

DetectorScore DiscrepancyDetector::score(const std::string& text) const {
  const double d = perturbation_discrepancy(*lm_, *perturber_, text, cfg_, mix64(seed_ ^ fnv1a64(text)));
  return {d, d, id()};
}

UniformLM::UniformLM(std::size_t vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size == 0) throw Error(Errc::Config, "uniform LM needs a positive vocabulary size");
}

std::string UniformLM::id() const { return "uniform" + std::to_string(vocab_size_); }

std::vector<double> UniformLM::token_logprobs(const std::string& text) const {
  return std::vector<double>(corpus::count_tokens(text, corpus::WhitespaceTokenizer()),
                             -std::log(static_cast<double>(vocab_size_)));
}

UnigramLM::UnigramLM(std::span<const std::string> corpus) {
  std::unordered_map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& doc : corpus) {
    for (auto& tok : whitespace_tokens(doc)) {
      ++counts[std::move(tok)];
      ++total;
    }
  }
  const double denom = static_cast<double>(total + counts.size() + 1);
  for (const auto& [tok, c] : counts) logp_.emplace(tok, std::log(static_cast<double>(c + 1) / denom));
  unseen_logp_ = std::log(1.0 / denom);
}

std::vector<double> UnigramLM::token_logprobs(const std::string& text) const {
  std::vector<double> out;
  for (const auto& tok : whitespace_tokens(text)) {
    auto it = logp_.find(tok);
    out.push_back(it == logp_.end() ? unseen_logp_ : it->second);
  }
  return out;
}

SpanPerturber::SpanPerturber(std::vector<std::string> fill_vocabulary) : fill_(std::move(fill_vocabulary)) {
  if (fill_.empty()) throw Error(Errc::Config, "span perturber needs a fill vocabulary");
}

std::vector<std::string> SpanPerturber::perturb(const std::string& text, const PerturbationConfig& cfg,
                                                std::uint64_t seed) const {
  const auto tokens = whitespace_tokens(text);
  std::vector<std::string> out;
  if (tokens.empty()) return out;
  const auto span = static_cast<std::size_t>(cfg.span_tokens);
  const auto n_spans = std::max<std::size_t>(
      1, static_cast<std::size_t>(cfg.mask_fraction * static_cast<double>(tokens.size()) /
                                  static_cast<double>(span)));
  Rng rng(seed);
  out.reserve(static_cast<std::size_t>(cfg.n_perturbations));
  for (int i = 0; i < cfg.n_perturbations; ++i) {
    auto t = tokens;
    for (std::size_t s = 0; s < n_spans; ++s) {
      const auto start = rng.index(t.size());
      for (std::size_t k = start; k < std::min(t.size(), start + span); ++k) {
        t[k] = fill_[rng.index(fill_.size())];
      }
    }
    std::string joined;
    for (const auto& w : t) {
      if (!joined.empty()) joined += ' ';
      joined += w;
    }
    out.push_back(std::move(joined));
  }
  return out;
}

}  // namespace failopt::detect
