#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "failopt/detect/detector.hpp"
#include "failopt/detect/lm.hpp"
#include "failopt/llm/backend.hpp"
#include "failopt/llm/mock.hpp"

namespace httplib {
class Server;
struct Request;
struct Response;
}  // namespace httplib

namespace failopt::test {

std::filesystem::path fixture_path(const std::string& name);
std::filesystem::path scenario_path(const std::string& id);
std::filesystem::path golden_path(const std::string& id);

std::string read_text(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);
llm::MockScenario scenario(const std::string& id);

/// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Log-probabilities given by a function of the text.
class FnLM final : public detect::LogprobBackend {
 public:
  explicit FnLM(std::function<std::vector<double>(const std::string&)> fn) : fn_(std::move(fn)) {}
  std::string id() const override { return "fn"; }
  std::vector<double> token_logprobs(const std::string& text) const override { return fn_(text); }

 private:
  std::function<std::vector<double>(const std::string&)> fn_;
};

/// Perturbations given by a function of (text, index).
class FnPerturber final : public detect::PerturbBackend {
 public:
  explicit FnPerturber(std::function<std::string(const std::string&, int)> fn) : fn_(std::move(fn)) {}
  std::string id() const override { return "fn"; }
  std::vector<std::string> perturb(const std::string& text, const detect::PerturbationConfig& cfg,
                                   std::uint64_t) const override {
    std::vector<std::string> out;
    for (int i = 0; i < cfg.n_perturbations; ++i) out.push_back(fn_(text, i));
    return out;
  }

 private:
  std::function<std::string(const std::string&, int)> fn_;
};

/// Probability of AI is high when a "[M" marker token occurs, with a small
/// length-dependent jitter to keep scores distinct.
class MarkerDetector final : public detect::Detector {
 public:
  std::string id() const override { return "marker"; }
  bool probabilistic() const override { return true; }
  detect::DetectorScore score(const std::string& text) const override {
    const double jitter = static_cast<double>(text.size() % 97) / 1000.0;
    const double p = text.find("[M") != std::string::npos ? 0.8 + jitter : 0.1 + jitter;
    return {p, p, id()};
  }
};

/// Chat backend given by a function of (prompt, sample_index).
class FnBackend final : public llm::ChatBackend {
 public:
  explicit FnBackend(std::function<std::string(const std::string&, int)> fn) : fn_(std::move(fn)) {}
  std::string id() const override { return "fn"; }
  std::string complete(const std::string& prompt, const llm::GenerationParams&, int sample_index) const override {
    return fn_(prompt, sample_index);
  }

 private:
  std::function<std::string(const std::string&, int)> fn_;
};

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

/// HTTP stub on 127.0.0.1 with an ephemeral port, serving POST routes.
class StubServer {
 public:
  StubServer();
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  void post(const std::string& route, Handler handler);
  /// Starts listening; call after registering routes.
  void start();
  std::string url() const;

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace failopt::test
