#include "failopt/llm/cache.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "failopt/digest.hpp"
#include "failopt/error.hpp"
#include "failopt/rng.hpp"

namespace failopt::llm {

std::string canonical(const GenerationParams& params) {
  std::ostringstream out;
  out.precision(17);
  out << "temperature=" << params.temperature << ";max_tokens=" << params.max_tokens << ";seed=";
  if (params.seed) out << *params.seed;
  else out << "none";
  return out.str();
}

CacheKey CacheKey::make(std::string backend_id, std::string_view prompt,
                        const GenerationParams& params, int sample_index) {
  return CacheKey{std::move(backend_id), sha256_hex(prompt), sha256_hex(canonical(params)),
                  params.temperature == 0.0 ? 0 : sample_index};
}

std::string CacheKey::digest() const {
  std::string material = backend_id;
  material += '\0';
  material += prompt_hash;
  material += '\0';
  material += params_digest;
  material += '\0';
  material += std::to_string(sample_index);
  return sha256_hex(material);
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(Errc::Io, "cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path ResponseCache::path_for(const CacheKey& key) const {
  const auto d = key.digest();
  return dir_ / d.substr(0, 2) / (d + ".json");
}

std::mutex& ResponseCache::stripe(const std::string& digest) const {
  return stripes_[fnv1a64(digest) % stripes_.size()];
}

std::optional<std::string> ResponseCache::get(const CacheKey& key) const {
  const auto path = path_for(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CacheCorruption, "unreadable cache entry " + path.string() + ": " + e.what());
  }
  const auto field = [&](const char* name) -> const nlohmann::json& {
    if (!j.is_object() || !j.contains(name)) {
      throw Error(Errc::CacheCorruption, "cache entry " + path.string() + " lacks '" + name + "'");
    }
    return j.at(name);
  };
  try {
    if (field("backend_id").get<std::string>() != key.backend_id ||
        field("prompt_hash").get<std::string>() != key.prompt_hash ||
        field("params_digest").get<std::string>() != key.params_digest ||
        field("sample_index").get<int>() != key.sample_index) {
      throw Error(Errc::CacheCorruption, "cache entry " + path.string() + " belongs to another key");
    }
    return field("response").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CacheCorruption, "malformed cache entry " + path.string() + ": " + e.what());
  }
}

void ResponseCache::put(const CacheKey& key, std::string_view response) {
  static std::atomic<std::uint64_t> counter{0};
  const auto path = path_for(key);
  const nlohmann::json j = {{"backend_id", key.backend_id},
                            {"prompt_hash", key.prompt_hash},
                            {"params_digest", key.params_digest},
                            {"sample_index", key.sample_index},
                            {"response", std::string(response)}};
  std::lock_guard lock(stripe(key.digest()));
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(Errc::Io, "cannot create " + path.parent_path().string() + ": " + ec.message());
  auto tmp = path;
  tmp += ".tmp" + std::to_string(counter.fetch_add(1)) + "." +
         std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << j.dump();
    if (!out) throw Error(Errc::Io, "cannot write cache entry " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(Errc::Io, "cannot publish cache entry " + path.string() + ": " + ec.message());
  }
}

}  // namespace failopt::llm
