#include "support.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <sstream>

#include <httplib.h>

namespace failopt::test {

namespace fs = std::filesystem;

fs::path fixture_path(const std::string& name) { return fs::path(FAILOPT_TEST_FIXTURES) / name; }
fs::path scenario_path(const std::string& id) { return fs::path(FAILOPT_TEST_SCENARIOS) / (id + ".json"); }
fs::path golden_path(const std::string& id) { return fs::path(FAILOPT_TEST_GOLDENS) / (id + ".json"); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& path) { return nlohmann::json::parse(read_text(path)); }

llm::MockScenario scenario(const std::string& id) { return llm::load_scenario(scenario_path(id)); }

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  path_ = fs::temp_directory_path() /
          ("failopt-test-" + std::to_string(stamp) + "-" + std::to_string(counter.fetch_add(1)));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

StubServer::StubServer() : server_(std::make_unique<httplib::Server>()) {}

StubServer::~StubServer() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

void StubServer::post(const std::string& route, Handler handler) { server_->Post(route, std::move(handler)); }

void StubServer::start() {
  port_ = server_->bind_to_any_port("127.0.0.1");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

std::string StubServer::url() const { return "http://127.0.0.1:" + std::to_string(port_); }

}  // namespace failopt::test
