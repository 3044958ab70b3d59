#include "run_config.hpp"

#include <fstream>

#include "failopt/error.hpp"

namespace failopt::cli {
namespace {

std::string backend_kind_name(BackendConfig::Kind k) { return k == BackendConfig::Kind::Mock ? "mock" : "http"; }

BackendConfig::Kind parse_backend_kind(const std::string& s) {
  if (s == "mock") return BackendConfig::Kind::Mock;
  if (s == "http") return BackendConfig::Kind::Http;
  throw Error(Errc::Config, "unknown backend kind '" + s + "'");
}

std::string detector_kind_name(DetectorConfig::Kind k) {
  switch (k) {
    case DetectorConfig::Kind::Linear: return "linear";
    case DetectorConfig::Kind::Perplexity: return "perplexity";
    case DetectorConfig::Kind::Discrepancy: return "discrepancy";
    case DetectorConfig::Kind::Remote: return "remote";
  }
  return "linear";
}

DetectorConfig::Kind parse_detector_kind(const std::string& s) {
  if (s == "linear") return DetectorConfig::Kind::Linear;
  if (s == "perplexity") return DetectorConfig::Kind::Perplexity;
  if (s == "discrepancy") return DetectorConfig::Kind::Discrepancy;
  if (s == "remote") return DetectorConfig::Kind::Remote;
  throw Error(Errc::Config, "unknown detector kind '" + s + "'");
}

/// Throws Config for keys absent from the defaults. Free-form objects
/// (detector params) are not descended into.
void reject_unknown_keys(const nlohmann::json& given, const nlohmann::json& known, const std::string& at) {
  if (!given.is_object() || !known.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const auto path = at + "/" + key;
    if (!known.contains(key)) throw Error(Errc::Config, "unknown configuration key " + path);
    if (key != "params") reject_unknown_keys(value, known.at(key), path);
  }
}

}  // namespace

void to_json(nlohmann::json& j, const DetectorConfig& c) {
  j = {{"kind", detector_kind_name(c.kind)}, {"params", c.params}};
}

void from_json(const nlohmann::json& j, DetectorConfig& c) {
  c.kind = parse_detector_kind(j.value("kind", std::string("linear")));
  c.params = j.value("params", nlohmann::json::object());
  if (!c.params.is_object()) throw Error(Errc::Config, "detector params must be an object");
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"backend",
        {{"kind", backend_kind_name(c.backend.kind)},
         {"scenario", c.backend.scenario},
         {"base_url", c.backend.base_url},
         {"model", c.backend.model},
         {"judge_model", c.backend.judge_model},
         {"key_env", c.backend.key_env}}},
       {"detector", c.detector},
       {"failopt", c.failopt},
       {"eval",
        {{"lo", c.eval.lo},
         {"hi", c.eval.hi},
         {"min_records", c.eval.min_records},
         {"max_records", c.eval.max_records},
         {"attacks", c.eval.attacks},
         {"detectors", c.eval.detectors},
         {"task", c.eval.task}}},
       {"paths",
        {{"data", c.paths.data},
         {"train", c.paths.train},
         {"val", c.paths.val},
         {"test", c.paths.test},
         {"instructions", c.paths.instructions},
         {"cache", c.paths.cache},
         {"out", c.paths.out}}},
       {"testbed",
        {{"n_detector_train", c.testbed.n_detector_train},
         {"n_tr", c.testbed.n_tr},
         {"n_val", c.testbed.n_val},
         {"n_test", c.testbed.n_test}}},
       {"augment",
        {{"sizes", c.augment.sizes},
         {"seeds", c.augment.seeds},
         {"sentence_expand", c.augment.sentence_expand},
         {"instructions", c.augment.instructions},
         {"multi_seed_arms", c.augment.multi_seed_arms},
         {"excluded_ids", c.augment.excluded_ids},
         {"retrain_iters", c.augment.retrain_iters},
         {"warm_start", c.augment.warm_start},
         {"scale_steps", c.augment.scale_steps},
         {"export_jsonl", c.augment.export_jsonl}}},
       {"probe",
        {{"criterion", c.probe.criterion},
         {"criterion_text", c.probe.criterion_text},
         {"n_questions", c.probe.n_questions}}},
       {"seed", c.seed},
       {"log_level", c.log_level}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  c = RunConfig{};
  const auto& b = j.at("backend");
  c.backend.kind = parse_backend_kind(b.at("kind").get<std::string>());
  c.backend.scenario = b.at("scenario").get<std::string>();
  c.backend.base_url = b.at("base_url").get<std::string>();
  c.backend.model = b.at("model").get<std::string>();
  c.backend.judge_model = b.at("judge_model").get<std::string>();
  c.backend.key_env = b.at("key_env").get<std::string>();
  c.detector = j.at("detector").get<DetectorConfig>();
  c.failopt = j.at("failopt").get<opt::FailoptConfig>();
  const auto& e = j.at("eval");
  c.eval.lo = e.at("lo").get<std::size_t>();
  c.eval.hi = e.at("hi").get<std::size_t>();
  c.eval.min_records = e.at("min_records").get<std::size_t>();
  c.eval.max_records = e.at("max_records").get<std::size_t>();
  c.eval.attacks = e.at("attacks").get<std::vector<std::string>>();
  c.eval.detectors = e.at("detectors").get<std::vector<DetectorConfig>>();
  c.eval.task = e.at("task").get<std::string>();
  const auto& p = j.at("paths");
  c.paths.data = p.at("data").get<std::string>();
  c.paths.train = p.at("train").get<std::string>();
  c.paths.val = p.at("val").get<std::string>();
  c.paths.test = p.at("test").get<std::string>();
  c.paths.instructions = p.at("instructions").get<std::string>();
  c.paths.cache = p.at("cache").get<std::string>();
  c.paths.out = p.at("out").get<std::string>();
  const auto& t = j.at("testbed");
  c.testbed.n_detector_train = t.at("n_detector_train").get<std::size_t>();
  c.testbed.n_tr = t.at("n_tr").get<std::size_t>();
  c.testbed.n_val = t.at("n_val").get<std::size_t>();
  c.testbed.n_test = t.at("n_test").get<std::size_t>();
  const auto& a = j.at("augment");
  c.augment.sizes = a.at("sizes").get<std::vector<std::size_t>>();
  c.augment.seeds = a.at("seeds").get<std::size_t>();
  c.augment.sentence_expand = a.at("sentence_expand").get<bool>();
  c.augment.instructions = a.at("instructions");
  c.augment.multi_seed_arms = a.at("multi_seed_arms").get<std::vector<std::string>>();
  c.augment.excluded_ids = a.at("excluded_ids").get<std::vector<std::string>>();
  c.augment.retrain_iters = a.at("retrain_iters").get<int>();
  c.augment.warm_start = a.at("warm_start").get<bool>();
  c.augment.scale_steps = a.at("scale_steps").get<bool>();
  c.augment.export_jsonl = a.at("export_jsonl").get<bool>();
  const auto& pr = j.at("probe");
  c.probe.criterion = pr.at("criterion").get<std::string>();
  c.probe.criterion_text = pr.at("criterion_text").get<std::string>();
  c.probe.n_questions = pr.at("n_questions").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.log_level = j.at("log_level").get<std::string>();
}

void RunConfig::validate() const {
  failopt.validate();
  if (backend.kind == BackendConfig::Kind::Http && (backend.base_url.empty() || backend.model.empty())) {
    throw Error(Errc::Config, "the http backend needs base_url and model");
  }
  if (backend.kind == BackendConfig::Kind::Mock && backend.scenario.empty()) {
    throw Error(Errc::Config, "the mock backend needs a scenario");
  }
  if (eval.lo > eval.hi) throw Error(Errc::Config, "eval.lo exceeds eval.hi");
  if (paths.out.empty()) throw Error(Errc::Config, "paths.out must be set");
  if (augment.sizes.empty()) throw Error(Errc::Config, "augment.sizes is empty");
  if (augment.retrain_iters < 0) throw Error(Errc::Config, "augment.retrain_iters is negative");
  for (const auto& arm : augment.multi_seed_arms) augment::parse_arm(arm);
  const auto& ins = augment.instructions;
  if (!(ins.is_array() || (ins.is_string() && (ins == "default" || ins == "optimized")))) {
    throw Error(Errc::Config, "augment.instructions must be \"default\", \"optimized\" or a list");
  }
  eval::parse_criterion(probe.criterion);
}

RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         const std::vector<std::pair<std::string, nlohmann::json>>& overrides) {
  nlohmann::json j = RunConfig{};
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error(Errc::Io, "cannot open config file " + file->string());
    nlohmann::json patch;
    try {
      patch = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::Config, "config file " + file->string() + " is not valid JSON: " + e.what());
    }
    if (!patch.is_object()) throw Error(Errc::Config, "config file must hold a JSON object");
    j.merge_patch(patch);
  }
  for (const auto& [pointer, value] : overrides) {
    try {
      j[nlohmann::json::json_pointer(pointer)] = value;
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::Config, "bad override " + pointer + ": " + e.what());
    }
  }
  reject_unknown_keys(j, nlohmann::json(RunConfig{}), "");
  RunConfig c;
  try {
    c = j.get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Config, std::string("invalid configuration: ") + e.what());
  }
  c.validate();
  return c;
}

std::pair<std::string, nlohmann::json> parse_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(Errc::Config, "overrides take the form key.path=value, got '" + assignment + "'");
  }
  std::string pointer = "/" + assignment.substr(0, eq);
  for (auto& ch : pointer) {
    if (ch == '.') ch = '/';
  }
  const auto raw = assignment.substr(eq + 1);
  auto value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  return {pointer, value};
}

}  // namespace failopt::cli
