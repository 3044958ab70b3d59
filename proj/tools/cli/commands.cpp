#include "commands.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "failopt/augment/augment.hpp"
#include "failopt/corpus/jsonl.hpp"
#include "failopt/corpus/text.hpp"
#include "failopt/detect/linear.hpp"
#include "failopt/detect/lm.hpp"
#include "failopt/detect/remote.hpp"
#include "failopt/eval/attack.hpp"
#include "failopt/eval/grid.hpp"
#include "failopt/eval/probe.hpp"
#include "failopt/llm/cache.hpp"
#include "failopt/llm/http_backend.hpp"
#include "failopt/llm/mock.hpp"
#include "failopt/logging.hpp"
#include "failopt/net.hpp"
#include "failopt/testbed/testbed.hpp"

#ifndef FAILOPT_SOURCE_SCENARIOS
#define FAILOPT_SOURCE_SCENARIOS ""
#endif

namespace failopt::cli {
namespace {

namespace fs = std::filesystem;

std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Backend: return "backend";
    case ErrorCategory::Internal: return "internal";
  }
  return "internal";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << text;
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
}

void write_json_file(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path out_dir(const RunConfig& cfg) { return fs::path(cfg.paths.out); }
fs::path results_dir(const RunConfig& cfg) { return out_dir(cfg) / "results"; }

std::string file_safe(std::string s) {
  for (auto& ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  }
  return s;
}

bool is_mock(const RunConfig& cfg) { return cfg.backend.kind == BackendConfig::Kind::Mock; }

/// Testbed mode: mock backend and no data files, so records are synthesized.
bool synthetic(const RunConfig& cfg) {
  return is_mock(cfg) && cfg.paths.data.empty() && cfg.paths.train.empty() && cfg.paths.val.empty();
}

llm::MockScenario scenario_of(const RunConfig& cfg) { return llm::load_scenario(resolve_scenario(cfg.backend.scenario)); }

std::shared_ptr<llm::ResponseCache> cache_of(const RunConfig& cfg) {
  if (cfg.paths.cache.empty()) return nullptr;
  return std::make_shared<llm::ResponseCache>(cfg.paths.cache);
}

std::unique_ptr<llm::Gateway> make_gateway(const RunConfig& cfg, bool judge = false) {
  std::shared_ptr<const llm::ChatBackend> backend;
  if (is_mock(cfg)) {
    backend = std::make_shared<llm::MockBackend>(scenario_of(cfg));
  } else {
    llm::HttpBackendConfig hc;
    hc.base_url = cfg.backend.base_url;
    hc.model = judge && !cfg.backend.judge_model.empty() ? cfg.backend.judge_model : cfg.backend.model;
    hc.api_key_env = cfg.backend.key_env;
    backend = std::make_shared<llm::HttpChatBackend>(hc);
  }
  auto gw = std::make_unique<llm::Gateway>(std::move(backend), cache_of(cfg));
  gw->set_transcript(std::make_shared<llm::TranscriptLog>(out_dir(cfg) / "transcripts" /
                                                          (judge ? "judge.jsonl" : "generation.jsonl")));
  return gw;
}

testbed::E2EConfig e2e_config(const RunConfig& cfg) {
  testbed::E2EConfig e;
  e.failopt = cfg.failopt;
  e.n_detector_train = cfg.testbed.n_detector_train;
  e.n_tr = cfg.testbed.n_tr;
  e.n_val = cfg.testbed.n_val;
  e.n_test = cfg.testbed.n_test;
  e.eval.bounds = {cfg.eval.lo, cfg.eval.hi};
  e.eval.min_records = cfg.eval.min_records;
  e.eval.max_records = cfg.eval.max_records;
  if (!cfg.paths.cache.empty()) e.cache_dir = cfg.paths.cache;
  e.run_dir = out_dir(cfg) / "optimize";
  return e;
}

eval::EvalConfig eval_config(const RunConfig& cfg) {
  eval::EvalConfig e;
  e.bounds = {cfg.eval.lo, cfg.eval.hi};
  e.min_records = cfg.eval.min_records;
  e.max_records = cfg.eval.max_records;
  return e;
}

/// Records and trained artifacts shared by the detector factory and commands.
struct Workspace {
  std::optional<llm::MockScenario> scenario;
  corpus::DatasetSplit d_tr{corpus::SplitName::Train, {}};
  corpus::DatasetSplit d_val{corpus::SplitName::Validation, {}};
  std::vector<corpus::QARecord> detector_train;  // synthetic only
  std::vector<corpus::QARecord> test;            // synthetic only
  std::shared_ptr<const detect::LinearNgramModel> linear;
};

Workspace load_workspace(const RunConfig& cfg, bool need_splits) {
  Workspace ws;
  if (is_mock(cfg)) ws.scenario = scenario_of(cfg);
  if (synthetic(cfg)) {
    const auto& t = cfg.testbed;
    const auto corpus = testbed::synth_corpus(*ws.scenario, t.n_detector_train + t.n_tr + t.n_val + t.n_test);
    auto it = corpus.records.begin();
    const auto take = [&](std::size_t n) {
      std::vector<corpus::QARecord> v(it, it + static_cast<std::ptrdiff_t>(n));
      it += static_cast<std::ptrdiff_t>(n);
      return v;
    };
    ws.detector_train = take(t.n_detector_train);
    ws.d_tr.records = take(t.n_tr);
    ws.d_val.records = take(t.n_val);
    ws.test = take(t.n_test);
    return ws;
  }
  if (need_splits) {
    if (cfg.paths.train.empty() || cfg.paths.val.empty()) {
      throw Error(Errc::Config, "paths.train and paths.val are required outside the testbed");
    }
    ws.d_tr = corpus::load_jsonl(cfg.paths.train, corpus::SplitName::Train);
    ws.d_val = corpus::load_jsonl(cfg.paths.val, corpus::SplitName::Validation);
  }
  return ws;
}

/// Human texts available to fit a local language model.
std::vector<std::string> lm_corpus(const Workspace& ws, std::span<const corpus::QARecord> fallback) {
  std::vector<std::string> texts;
  for (const auto& r : ws.detector_train) texts.push_back(r.human_answer);
  for (const auto& r : ws.d_tr.records) texts.push_back(r.human_answer);
  if (texts.empty()) {
    for (const auto& r : fallback) texts.push_back(r.human_answer);
  }
  if (texts.empty()) throw Error(Errc::InsufficientData, "no human texts to fit a local language model");
  return texts;
}

bool is_url(const std::string& s) { return s.starts_with("http://") || s.starts_with("https://"); }

detect::RemoteConfig remote_config(const std::string& url) {
  detect::RemoteConfig rc;
  rc.base_url = url;
  return rc;
}

std::shared_ptr<const detect::LogprobBackend> make_lm(const std::string& spec, const Workspace& ws,
                                                      std::span<const corpus::QARecord> fallback) {
  if (spec == "unigram") {
    const auto texts = lm_corpus(ws, fallback);
    return std::make_shared<detect::UnigramLM>(texts);
  }
  if (spec.starts_with("uniform:")) {
    const auto v = std::stoull(spec.substr(8));
    return std::make_shared<detect::UniformLM>(static_cast<std::size_t>(v));
  }
  if (is_url(spec)) return std::make_shared<detect::RemoteLogprobBackend>(remote_config(spec));
  throw Error(Errc::Config, "unknown language model '" + spec + "'");
}

std::shared_ptr<const detect::Detector> make_detector(const DetectorConfig& dc, Workspace& ws, const RunConfig& cfg,
                                                      std::span<const corpus::QARecord> fallback = {}) {
  const auto& p = dc.params;
  switch (dc.kind) {
    case DetectorConfig::Kind::Linear: {
      if (p.contains("model")) {
        return std::make_shared<detect::LinearDetector>(
            std::make_shared<detect::LinearNgramModel>(detect::load_model(p.at("model").get<std::string>())));
      }
      if (!ws.linear) {
        if (ws.detector_train.empty()) {
          throw Error(Errc::Config, "the linear detector needs params.model outside the testbed");
        }
        std::vector<detect::LabeledText> train;
        for (const auto& r : ws.detector_train) {
          train.push_back({r.human_answer, detect::Label::Human});
          if (auto base = r.base_generation()) train.push_back({std::string(*base), detect::Label::AI});
        }
        ws.linear = std::make_shared<detect::LinearNgramModel>(detect::train_linear(train, {}));
        detect::save_model(*ws.linear, out_dir(cfg) / "detector.json");
      }
      return std::make_shared<detect::LinearDetector>(ws.linear);
    }
    case DetectorConfig::Kind::Perplexity:
      return std::make_shared<detect::PerplexityDetector>(make_lm(p.value("lm", std::string("unigram")), ws, fallback));
    case DetectorConfig::Kind::Discrepancy: {
      auto lm = make_lm(p.value("lm", std::string("unigram")), ws, fallback);
      detect::PerturbationConfig pc;
      pc.n_perturbations = p.value("n", pc.n_perturbations);
      pc.mask_fraction = p.value("mask_fraction", pc.mask_fraction);
      pc.span_tokens = p.value("span_tokens", pc.span_tokens);
      const auto perturber = p.value("perturber", std::string("span"));
      std::shared_ptr<const detect::PerturbBackend> pb;
      if (perturber == "span") {
        std::vector<std::string> fill;
        if (ws.scenario) {
          fill = ws.scenario->vocabulary;
        } else {
          std::set<std::string> seen;
          for (const auto& t : lm_corpus(ws, fallback)) {
            const auto spans = corpus::WhitespaceTokenizer().spans(t);
            for (const auto& s : spans) seen.insert(t.substr(s.begin, s.end - s.begin));
          }
          fill.assign(seen.begin(), seen.end());
        }
        pb = std::make_shared<detect::SpanPerturber>(std::move(fill));
      } else if (is_url(perturber)) {
        pb = std::make_shared<detect::RemotePerturbBackend>(remote_config(perturber));
      } else {
        throw Error(Errc::Config, "unknown perturber '" + perturber + "'");
      }
      return std::make_shared<detect::DiscrepancyDetector>(std::move(lm), std::move(pb), pc,
                                                           p.value("seed", cfg.seed));
    }
    case DetectorConfig::Kind::Remote:
      if (!p.contains("url")) throw Error(Errc::Config, "the remote detector needs params.url");
      return std::make_shared<detect::RemoteDetector>(remote_config(p.at("url").get<std::string>()));
  }
  throw Error(Errc::Config, "unknown detector kind");
}

bool uses_network(const RunConfig& cfg) {
  if (!is_mock(cfg)) return true;
  const auto remote = [](const DetectorConfig& d) {
    if (d.kind == DetectorConfig::Kind::Remote) return true;
    for (const char* key : {"lm", "perturber"}) {
      if (d.params.contains(key) && d.params.at(key).is_string() && is_url(d.params.at(key).get<std::string>())) {
        return true;
      }
    }
    return false;
  };
  if (remote(cfg.detector)) return true;
  for (const auto& d : cfg.eval.detectors) {
    if (remote(d)) return true;
  }
  return false;
}

std::string task_name(const RunConfig& cfg) {
  if (!cfg.eval.task.empty()) return cfg.eval.task;
  if (synthetic(cfg)) return "synthetic/" + scenario_of(cfg).id;
  if (!cfg.paths.data.empty()) return fs::path(cfg.paths.data).stem().string();
  return "task";
}

void print_summary(const nlohmann::json& j) { std::cout << j.dump(2) << std::endl; }

nlohmann::json report_summary(const eval::EvalReport& r) {
  return {{"detector", r.detector_id},
          {"attack", r.attack_name},
          {"auroc", r.auroc},
          {"base_auroc", r.base_auroc},
          {"asr", r.asr ? nlohmann::json(*r.asr) : nlohmann::json()},
          {"n_samples", r.n_samples}};
}

void write_grid(const RunConfig& cfg, std::span<const eval::EvalReport> reports, const std::string& stem) {
  fs::create_directories(results_dir(cfg) / "reports");
  write_text(results_dir(cfg) / (stem + ".csv"), eval::grid_csv(reports));
  write_text(results_dir(cfg) / (stem + ".txt"), eval::grid_text(reports));
  for (const auto& r : reports) {
    eval::save_report(r, results_dir(cfg) / "reports" / (file_safe(r.detector_id + "_" + r.attack_name) + ".json"));
  }
}

llm::InstructionList instructions_from(const RunConfig& cfg, const std::optional<llm::InstructionList>& optimized) {
  const auto& ins = cfg.augment.instructions;
  if (ins.is_array()) return llm::InstructionList(ins.get<std::vector<std::string>>());
  if (ins == "default") return augment::default_failopt_instructions();
  if (optimized) return *optimized;
  if (cfg.paths.instructions.empty()) {
    throw Error(Errc::Config, "augment.instructions is \"optimized\" but paths.instructions is not set");
  }
  return opt::load_final_list(cfg.paths.instructions);
}

augment::AugmentationPlan plan_from(const RunConfig& cfg) {
  augment::AugmentationPlan plan;
  plan.sentence_expand = cfg.augment.sentence_expand;
  plan.size_sweep = cfg.augment.sizes;
  plan.n_seeds = cfg.augment.seeds;
  plan.seed = cfg.seed;
  plan.excluded_ids = cfg.augment.excluded_ids;
  plan.max_tokens = cfg.failopt.max_tokens;
  plan.max_in_flight = cfg.failopt.max_in_flight;
  plan.task = corpus::TaskSpec{cfg.failopt.task, cfg.failopt.task_description, "", cfg.failopt.min_words};
  plan.multi_seed_arms.clear();
  for (const auto& a : cfg.augment.multi_seed_arms) plan.multi_seed_arms.push_back(augment::parse_arm(a));
  return plan;
}

detect::LinearHyper retrain_hyper(const RunConfig& cfg) {
  detect::LinearHyper h;
  h.max_iters = cfg.augment.retrain_iters;
  return h;
}

void write_ablation(const RunConfig& cfg, const augment::AblationResult& grid) {
  write_text(results_dir(cfg) / "ablation.csv", augment::ablation_csv(grid));
  const auto traj = augment::human_score_trajectory(grid);
  write_text(results_dir(cfg) / "trajectory.csv", augment::trajectory_csv(traj));
  if (!grid.failures.empty()) {
    nlohmann::json f = nlohmann::json::array();
    for (const auto& x : grid.failures) {
      f.push_back({{"arm", augment::to_string(x.arm)}, {"size", x.size}, {"seed", x.seed_index}, {"message", x.message}});
    }
    write_json_file(results_dir(cfg) / "ablation_failures.json", f);
  }
}

}  // namespace

int exit_code(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Data: return 3;
    case ErrorCategory::Backend: return 4;
    case ErrorCategory::Internal: return 1;
  }
  return 1;
}

nlohmann::json error_json(Errc code, const std::string& message) {
  const auto cat = category(code);
  return {{"error",
           {{"code", to_string(code)},
            {"category", category_name(cat)},
            {"exit_code", exit_code(cat)},
            {"message", message}}}};
}

fs::path resolve_scenario(const std::string& name_or_path) {
  if (fs::is_regular_file(name_or_path)) return name_or_path;
  const auto file = name_or_path + ".json";
  std::vector<fs::path> dirs{"scenarios"};
  if (const char* env = std::getenv("FAILOPT_SCENARIO_DIR")) dirs.emplace_back(env);
  if (*FAILOPT_SOURCE_SCENARIOS) dirs.emplace_back(FAILOPT_SOURCE_SCENARIOS);
  for (const auto& d : dirs) {
    if (fs::is_regular_file(d / file)) return d / file;
  }
  throw Error(Errc::Io, "scenario '" + name_or_path + "' not found");
}

void cmd_optimize(const RunConfig& cfg, bool resume) {
  auto ws = load_workspace(cfg, true);
  const auto detector = make_detector(cfg.detector, ws, cfg);
  const auto gateway = make_gateway(cfg);
  const auto result =
      opt::run_failopt(cfg.failopt, ws.d_tr, ws.d_val, *gateway, *detector, opt::RunOptions{out_dir(cfg), resume});
  print_summary({{"final_list", result.final_list.items()},
                 {"final_rate", result.final_rate},
                 {"baseline_rate", result.baseline_rate},
                 {"tau", eval::threshold_to_json(result.tau)},
                 {"out", cfg.paths.out}});
}

void cmd_eval(const RunConfig& cfg) {
  auto ws = load_workspace(cfg, false);
  std::vector<corpus::QARecord> records;
  if (synthetic(cfg)) {
    records = ws.test;
    const auto gateway = make_gateway(cfg);
    testbed::attach_paraphrase_attack(records, *gateway, cfg.failopt.min_words, cfg.failopt.max_in_flight);
    llm::InstructionList list;
    if (!cfg.paths.instructions.empty()) {
      list = opt::load_final_list(cfg.paths.instructions);
    } else {
      const auto detector = make_detector(cfg.detector, ws, cfg);
      list = opt::run_failopt(cfg.failopt, ws.d_tr, ws.d_val, *gateway, *detector,
                              opt::RunOptions{out_dir(cfg) / "optimize", false})
                 .final_list;
    }
    testbed::attach_instruction_attack(records, *gateway, std::string(testbed::kFailoptAttack), list,
                                       corpus::TaskSpec{cfg.failopt.task, cfg.failopt.task_description, "",
                                                        cfg.failopt.min_words},
                                       cfg.failopt.max_in_flight);
  } else {
    if (cfg.paths.data.empty()) throw Error(Errc::Config, "eval needs paths.data outside the testbed");
    records = corpus::load_jsonl(cfg.paths.data, corpus::SplitName::Test).records;
  }

  std::vector<DetectorConfig> detectors = cfg.eval.detectors;
  if (detectors.empty()) detectors.push_back(cfg.detector);
  const auto task = task_name(cfg);
  std::vector<eval::EvalReport> reports;
  for (const auto& dc : detectors) {
    const auto detector = make_detector(dc, ws, cfg, records);
    const auto policy = eval::TauPolicy::default_for(*detector);
    for (const auto& attack : cfg.eval.attacks) {
      const bool present = std::any_of(records.begin(), records.end(),
                                       [&](const corpus::QARecord& r) { return r.generation(attack).has_value(); });
      if (!present) {
        std::cerr << "skipping attack '" << attack << "': no record carries it\n";
        continue;
      }
      reports.push_back(eval::evaluate_attack(*detector, records, attack, task, policy, eval_config(cfg)));
    }
  }
  if (reports.empty()) throw Error(Errc::InsufficientData, "no attack in eval.attacks is present in the records");
  write_grid(cfg, reports, "grid");
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& r : reports) summary.push_back(report_summary(r));
  print_summary({{"reports", summary}, {"grid", (results_dir(cfg) / "grid.csv").string()}});
}

void cmd_augment(const RunConfig& cfg) {
  auto plan = plan_from(cfg);
  if (synthetic(cfg)) {
    if (!(cfg.augment.instructions.is_string() && cfg.augment.instructions == "optimized")) {
      plan.failopt_instructions = instructions_from(cfg, std::nullopt);
    }
    const auto outcome = testbed::run_e2e_defense(
        scenario_of(cfg), e2e_config(cfg), plan,
        testbed::RetrainConfig{retrain_hyper(cfg), cfg.augment.warm_start, cfg.augment.scale_steps});
    if (cfg.augment.export_jsonl) augment::save_samples_jsonl(outcome.samples, out_dir(cfg) / "augmented.jsonl");
    write_ablation(cfg, outcome.grid);
    const std::vector<eval::EvalReport> attack{outcome.attack.base_report, outcome.attack.para_report,
                                               outcome.attack.attacked_report};
    write_grid(cfg, attack, "attack_grid");
    print_summary({{"samples", outcome.samples.size()},
                   {"rows", outcome.grid.rows.size()},
                   {"failures", outcome.grid.failures.size()},
                   {"ablation", (results_dir(cfg) / "ablation.csv").string()}});
    return;
  }

  if (cfg.paths.data.empty() || cfg.paths.test.empty()) {
    throw Error(Errc::Config, "augment needs paths.data (questions) and paths.test (eval records)");
  }
  if (cfg.detector.kind != DetectorConfig::Kind::Linear || !cfg.detector.params.contains("model")) {
    throw Error(Errc::Config, "augment retrains the linear detector and needs detector.params.model");
  }
  const auto base_corpus = corpus::load_jsonl(cfg.paths.data, corpus::SplitName::Train);
  const auto test = corpus::load_jsonl(cfg.paths.test, corpus::SplitName::Test);
  plan.failopt_instructions = instructions_from(cfg, std::nullopt);
  for (const auto& r : base_corpus.records) plan.questions.push_back(r.id);
  const auto gateway = make_gateway(cfg);
  const auto samples = augment::build_augmented_dataset(plan, *gateway, base_corpus);
  if (cfg.augment.export_jsonl) augment::save_samples_jsonl(samples, out_dir(cfg) / "augmented.jsonl");

  auto base = std::make_shared<detect::LinearNgramModel>(
      detect::load_model(cfg.detector.params.at("model").get<std::string>()));
  auto hyper = retrain_hyper(cfg);
  hyper.n_lo = base->n_lo;
  hyper.n_hi = base->n_hi;
  for (int b = 12; b <= 30; ++b) {
    if ((std::size_t{1} << b) == base->dim) hyper.dim_log2 = b;
  }
  augment::LinearTrainer trainer(hyper, base, cfg.augment.warm_start, cfg.augment.scale_steps);
  augment::EvalSuite suite;
  suite.records = test.records;
  suite.attacks = cfg.eval.attacks;
  suite.task = task_name(cfg);
  suite.config = eval_config(cfg);
  const auto grid = augment::run_ablation(plan, samples, trainer, suite);
  write_ablation(cfg, grid);
  print_summary({{"samples", samples.size()}, {"rows", grid.rows.size()}, {"failures", grid.failures.size()}});
}

void cmd_probe(const RunConfig& cfg) {
  std::vector<std::string> questions;
  if (!cfg.paths.data.empty()) {
    for (const auto& r : corpus::load_jsonl(cfg.paths.data).records) questions.push_back(r.question);
    if (questions.size() > cfg.probe.n_questions) questions.resize(cfg.probe.n_questions);
  } else if (is_mock(cfg)) {
    const auto scenario = scenario_of(cfg);
    for (std::size_t i = 0; i < cfg.probe.n_questions; ++i) questions.push_back(llm::mock_question(scenario, i));
  } else {
    throw Error(Errc::Config, "probe needs paths.data outside the mock backend");
  }
  const auto generator = make_gateway(cfg);
  const auto judge = make_gateway(cfg, true);
  eval::ProbeConfig pc;
  pc.base_template = cfg.failopt.task;
  pc.seed = cfg.seed;
  pc.max_in_flight = cfg.failopt.max_in_flight;
  const auto criterion = eval::parse_criterion(cfg.probe.criterion);
  const auto text = cfg.probe.criterion_text.empty() ? cfg.probe.criterion : cfg.probe.criterion_text;
  const auto r = eval::probe_shortcuts(*generator, *judge, questions, task_name(cfg), criterion, text, pc);
  const nlohmann::json j = {{"task", r.task},
                            {"criterion", eval::to_string(r.criterion)},
                            {"wins_revised", r.wins_revised},
                            {"total", r.total},
                            {"win_ratio", r.win_ratio},
                            {"dropped_refusals", r.dropped_refusals},
                            {"dropped_unparsed", r.dropped_unparsed}};
  write_json_file(results_dir(cfg) / "probe.json", j);
  print_summary(j);
}

void cmd_testbed(const RunConfig& cfg, TestbedMode mode) {
  if (!is_mock(cfg)) throw Error(Errc::Config, "the testbed runs on the mock backend only");
  if (mode == TestbedMode::Defense) {
    cmd_augment(cfg);
    return;
  }
  const auto outcome = testbed::run_e2e_attack(scenario_of(cfg), e2e_config(cfg));
  const std::vector<eval::EvalReport> reports{outcome.base_report, outcome.para_report, outcome.attacked_report};
  write_grid(cfg, reports, "attack_grid");
  opt::save_final_list(outcome.failopt, out_dir(cfg) / "final_list.json");
  detect::save_model(*outcome.model, out_dir(cfg) / "detector.json");
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& r : reports) summary.push_back(report_summary(r));
  print_summary({{"final_list", outcome.failopt.final_list.items()},
                 {"reports", summary},
                 {"network_calls", outcome.network_calls}});
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Adversarial instruction search against AI-text detectors, with evaluation and defense tooling."};
  app.name(args.empty() ? "failopt" : args.front());
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file, out, scenario, backend, base_url, model, detector, data, train, val, test, instructions,
      cache, log_level;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  app.add_option("-c,--config", config_file, "JSON config file");
  app.add_option("-o,--out", out, "Run directory");
  app.add_option("--seed", seed, "Seed for every seeded component");
  app.add_option("--scenario", scenario, "Mock scenario name or file");
  app.add_option("--backend", backend, "mock or http")->check(CLI::IsMember({"mock", "http"}));
  app.add_option("--base-url", base_url, "HTTP backend base URL");
  app.add_option("--model", model, "HTTP backend model");
  app.add_option("--detector", detector, "linear, perplexity, discrepancy or remote")
      ->check(CLI::IsMember({"linear", "perplexity", "discrepancy", "remote"}));
  app.add_option("--data", data, "Records JSONL");
  app.add_option("--train", train, "D_tr JSONL");
  app.add_option("--val", val, "D_val JSONL");
  app.add_option("--test", test, "Evaluation records JSONL for augment");
  app.add_option("--instructions", instructions, "final_list.json with an instruction list");
  app.add_option("--cache", cache, "Response cache directory");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");
  app.add_option("--set", sets, "Override a config key: a.b.c=value");

  auto* optimize = app.add_subcommand("optimize", "Search an adversarial instruction list");
  std::string resume_dir;
  optimize->add_option("--resume", resume_dir, "Continue a checkpointed run directory");
  app.add_subcommand("eval", "Evaluate attacks against detectors");
  app.add_subcommand("augment", "Build augmented training data and run the ablation");
  auto* probe = app.add_subcommand("probe", "Judge-based shortcut probe");
  std::string criterion, criterion_text;
  probe->add_option("--criterion", criterion, "diversity, subjectivity, casualness or emotionality");
  probe->add_option("--criterion-text", criterion_text, "Criterion text shown to the generator and the judge");
  auto* tb = app.add_subcommand("testbed", "End-to-end synthetic experiments");
  std::string mode = "attack";
  tb->add_option("--mode", mode, "attack or defense")->check(CLI::IsMember({"attack", "defense"}));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_json(Errc::Config, e.what()).dump() << std::endl;
    return 2;
  }

  fs::path out_path;
  try {
    std::vector<std::pair<std::string, nlohmann::json>> overrides;
    const auto put = [&](const char* pointer, const std::string& v) {
      if (!v.empty()) overrides.emplace_back(pointer, v);
    };
    std::optional<fs::path> file;
    if (!config_file.empty()) file = config_file;
    const bool resume = !resume_dir.empty();
    if (resume) {
      if (!config_file.empty()) throw Error(Errc::Config, "--resume reads the run's own config; drop --config");
      file = fs::path(resume_dir) / "config.json";
      out = resume_dir;
    }
    put("/paths/out", out);
    put("/backend/scenario", scenario);
    put("/backend/kind", backend);
    put("/backend/base_url", base_url);
    put("/backend/model", model);
    put("/detector/kind", detector);
    put("/paths/data", data);
    put("/paths/train", train);
    put("/paths/val", val);
    put("/paths/test", test);
    put("/paths/instructions", instructions);
    put("/paths/cache", cache);
    put("/log_level", log_level);
    if (seed) {
      overrides.emplace_back("/seed", *seed);
      overrides.emplace_back("/failopt/seed", *seed);
    }
    if (!criterion.empty()) overrides.emplace_back("/probe/criterion", criterion);
    if (!criterion_text.empty()) overrides.emplace_back("/probe/criterion_text", criterion_text);
    for (const auto& s : sets) overrides.push_back(parse_override(s));

    const auto cfg = resolve_config(file, overrides);
    set_log_level(cfg.log_level);
    out_path = cfg.paths.out;
    for (const char* sub : {"logs", "transcripts", "results"}) fs::create_directories(out_path / sub);
    fs::remove(out_path / "error.json");
    write_json_file(out_path / "config.json", cfg);
    set_log_file(out_path / "logs" / "failopt.log");
    struct LogFileReset {
      ~LogFileReset() { clear_log_file(); }
    } log_reset;

    std::optional<net::BlockScope> guard;
    if (!uses_network(cfg)) guard.emplace();

    const auto* sub = app.get_subcommands().front();
    const auto name = sub->get_name();
    if (name == "optimize") cmd_optimize(cfg, resume);
    else if (name == "eval") cmd_eval(cfg);
    else if (name == "augment") cmd_augment(cfg);
    else if (name == "probe") cmd_probe(cfg);
    else cmd_testbed(cfg, mode == "defense" ? TestbedMode::Defense : TestbedMode::Attack);
    return 0;
  } catch (const Error& e) {
    const auto j = error_json(e.code(), e.what());
    std::cerr << j.dump() << std::endl;
    if (out_path.empty() && !out.empty()) {
      // The config did not resolve; the --out flag still names the run directory.
      std::error_code ec;
      fs::create_directories(out, ec);
      out_path = out;
    }
    if (!out_path.empty() && fs::is_directory(out_path)) {
      std::ofstream(out_path / "error.json") << j.dump(2) << '\n';
    }
    return exit_code(category(e.code()));
  } catch (const std::exception& e) {
    nlohmann::json j = {{"error", {{"code", "Internal"}, {"category", "internal"}, {"exit_code", 1}, {"message", e.what()}}}};
    std::cerr << j.dump() << std::endl;
    return 1;
  }
}

}  // namespace failopt::cli
