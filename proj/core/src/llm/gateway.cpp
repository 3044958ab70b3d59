#include "failopt/llm/gateway.hpp"

#include <algorithm>
#include <thread>

#include <nlohmann/json.hpp>

namespace failopt::llm {

std::vector<std::string> BatchResult::values() const {
  if (!errors.empty()) {
    const auto& e = errors.front();
    throw Error(e.code, "batch item " + std::to_string(e.index) + ": " + e.message);
  }
  std::vector<std::string> out;
  out.reserve(outputs.size());
  for (const auto& o : outputs) out.push_back(*o);
  return out;
}

TranscriptLog::TranscriptLog(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::app);
  if (!out_) throw Error(Errc::Io, "cannot open transcript " + path.string());
}

void TranscriptLog::append(const std::string& prompt, const std::string& response,
                           const GenerationParams& params, int sample_index, bool cached) {
  const nlohmann::json j = {{"prompt", prompt},
                            {"response", response},
                            {"temperature", params.temperature},
                            {"sample_index", sample_index},
                            {"cached", cached}};
  std::lock_guard lock(mu_);
  out_ << j.dump() << '\n';
  out_.flush();
}

Gateway::Gateway(std::shared_ptr<const ChatBackend> backend, std::shared_ptr<ResponseCache> cache)
    : backend_(std::move(backend)), cache_(std::move(cache)) {
  if (!backend_) throw Error(Errc::Config, "gateway needs a backend");
}

void Gateway::set_transcript(std::shared_ptr<TranscriptLog> log) { transcript_ = std::move(log); }

std::string Gateway::generate(const std::string& prompt, const GenerationParams& params,
                              int sample_index, bool use_cache) {
  if (prompt.empty()) throw Error(Errc::EmptyInput, "empty prompt");
  if (params.temperature < 0.0 || params.max_tokens <= 0) {
    throw Error(Errc::Config, "invalid generation params: " + canonical(params));
  }
  const int effective_sample = params.temperature == 0.0 ? 0 : sample_index;
  std::optional<CacheKey> key;
  if (cache_) {
    key = CacheKey::make(backend_->id(), prompt, params, effective_sample);
    if (auto hit = use_cache ? cache_->get(*key) : std::nullopt) {
      cache_hits_.fetch_add(1);
      if (transcript_) transcript_->append(prompt, *hit, params, effective_sample, true);
      return *hit;
    }
  }
  backend_calls_.fetch_add(1);
  auto text = backend_->complete(prompt, params, effective_sample);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(Errc::BackendRefusal, "backend " + backend_->id() + " returned an empty completion");
  }
  if (cache_) cache_->put(*key, text);
  if (transcript_) transcript_->append(prompt, text, params, effective_sample, false);
  return text;
}

BatchResult Gateway::batch_generate(std::span<const Request> requests, std::size_t max_in_flight) {
  if (max_in_flight < 1) throw Error(Errc::Config, "max_in_flight must be at least 1");
  BatchResult result;
  result.outputs.resize(requests.size());
  std::vector<std::optional<ItemError>> errors(requests.size());
  std::atomic<std::size_t> next{0};

  const auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < requests.size();) {
      const auto& r = requests[i];
      try {
        result.outputs[i] = generate(r.prompt, r.params, r.sample_index);
      } catch (const Error& e) {
        errors[i] = ItemError{i, e.code(), e.what()};
      } catch (const std::exception& e) {
        errors[i] = ItemError{i, Errc::Backend, e.what()};
      }
    }
  };
  const auto n_workers = std::min(max_in_flight, requests.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) result.errors.push_back(std::move(*e));
  }
  return result;
}

BatchResult Gateway::batch_generate(std::span<const std::string> prompts,
                                    const GenerationParams& params, std::size_t max_in_flight) {
  std::vector<Request> requests;
  requests.reserve(prompts.size());
  for (const auto& p : prompts) requests.push_back({p, params, 0});
  return batch_generate(requests, max_in_flight);
}

}  // namespace failopt::llm
