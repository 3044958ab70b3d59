#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "failopt/augment/augment.hpp"
#include "failopt/eval/probe.hpp"
#include "failopt/opt/failopt.hpp"

namespace failopt::cli {

struct BackendConfig {
  enum class Kind { Mock, Http };
  Kind kind = Kind::Mock;
  std::string scenario = "S1";  // scenario name or file, mock only
  std::string base_url;
  std::string model;
  std::string judge_model;  // empty: same as model
  std::string key_env = "OPENAI_API_KEY";
};

struct DetectorConfig {
  enum class Kind { Linear, Perplexity, Discrepancy, Remote };
  Kind kind = Kind::Linear;
  /// Linear: {model?}; Perplexity: {lm}; Discrepancy: {lm, perturber, n, mask_fraction,
  /// span_tokens}; Remote: {url}. lm is "unigram", "uniform:<V>" or a URL.
  nlohmann::json params = nlohmann::json::object();
};

struct EvalSection {
  std::size_t lo = 256;
  std::size_t hi = 450;
  std::size_t min_records = 10;
  std::size_t max_records = 200;
  std::vector<std::string> attacks{"N/A", "PARA", "FAILOpt"};
  std::vector<DetectorConfig> detectors;  // empty: the main detector only
  std::string task;                       // empty: derived from the data
};

struct Paths {
  std::string data;          // records JSONL (eval, augment, probe)
  std::string train;         // D_tr JSONL
  std::string val;           // D_val JSONL
  std::string test;          // augmentation eval records JSONL
  std::string instructions;  // final_list.json
  std::string cache;         // response cache directory
  std::string out = "runs/latest";
};

struct TestbedSection {
  std::size_t n_detector_train = 300;
  std::size_t n_tr = 100;
  std::size_t n_val = 100;
  std::size_t n_test = 200;
};

struct AugmentSection {
  std::vector<std::size_t> sizes{500, 1000, 2000};
  std::size_t seeds = 5;
  bool sentence_expand = true;
  /// "default", "optimized" (the optimizer's final list) or an explicit list.
  nlohmann::json instructions = "optimized";
  std::vector<std::string> multi_seed_arms{"Full"};
  std::vector<std::string> excluded_ids;
  int retrain_iters = 20;  // steps per smallest size point
  bool warm_start = false;
  bool scale_steps = true;
  bool export_jsonl = false;
};

struct ProbeSection {
  std::string criterion = "casualness";
  std::string criterion_text;  // empty: the criterion name
  std::size_t n_questions = 100;
};

struct RunConfig {
  BackendConfig backend;
  DetectorConfig detector;
  opt::FailoptConfig failopt;
  EvalSection eval;
  Paths paths;
  TestbedSection testbed;
  AugmentSection augment;
  ProbeSection probe;
  std::uint64_t seed = 17;
  std::string log_level = "warn";

  /// Throws Config for inconsistent settings.
  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);
void to_json(nlohmann::json& j, const DetectorConfig& c);
void from_json(const nlohmann::json& j, DetectorConfig& c);

/// Defaults, then the optional config file (JSON merge patch), then the
/// overrides, each a JSON pointer ("/failopt/k") with a JSON value.
RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         const std::vector<std::pair<std::string, nlohmann::json>>& overrides);

/// Parses "a.b.c=value": the value is read as JSON when it parses, else as a string.
std::pair<std::string, nlohmann::json> parse_override(const std::string& assignment);

}  // namespace failopt::cli
