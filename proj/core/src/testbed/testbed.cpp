#include "failopt/testbed/testbed.hpp"

#include <algorithm>

#include "../log.hpp"
#include "failopt/error.hpp"
#include "failopt/llm/cache.hpp"
#include "failopt/llm/refusal.hpp"
#include "failopt/net.hpp"

namespace failopt::testbed {
namespace {

corpus::TaskSpec eli5_task(const opt::FailoptConfig& cfg) {
  return corpus::TaskSpec{cfg.task, cfg.task_description, "", cfg.min_words};
}

std::unique_ptr<llm::Gateway> make_gateway(const llm::MockScenario& scenario, const E2EConfig& cfg) {
  std::shared_ptr<llm::ResponseCache> cache;
  if (cfg.cache_dir) cache = std::make_shared<llm::ResponseCache>(*cfg.cache_dir);
  return std::make_unique<llm::Gateway>(std::make_shared<llm::MockBackend>(scenario), std::move(cache));
}

corpus::DatasetSplit slice(const SyntheticCorpus& c, std::size_t begin, std::size_t n, corpus::SplitName name) {
  corpus::DatasetSplit out{name, {}};
  out.records.assign(c.records.begin() + static_cast<std::ptrdiff_t>(begin),
                     c.records.begin() + static_cast<std::ptrdiff_t>(begin + n));
  return out;
}

}  // namespace

SyntheticCorpus synth_corpus(const llm::MockScenario& scenario, std::size_t n_records, std::size_t first_index) {
  scenario.validate();
  if (n_records < 1) throw Error(Errc::Config, "synthetic corpora need at least one record");
  SyntheticCorpus out;
  out.scenario_id = scenario.id;
  out.records.reserve(n_records);
  const llm::GenerationParams params{1.0, 600, std::nullopt};
  for (std::size_t i = first_index; i < first_index + n_records; ++i) {
    corpus::QARecord r;
    r.id = scenario.id + "-" + std::to_string(i);
    r.question = llm::mock_question(scenario, i);
    r.human_answer = llm::mock_human_answer(scenario, r.question);
    const auto prompt = llm::render_prompt(corpus::TaskSpec{corpus::TaskTemplate::Eli5, "", r.question, 300}, {});
    const auto base = llm::mock_llm(scenario, prompt, params, 0);
    std::vector<bool> bits;
    for (const auto& m : scenario.markers) bits.push_back(base.find(m.token) != std::string::npos);
    r.generations.emplace(corpus::kBaseGeneration, base);
    out.records.push_back(std::move(r));
    out.generation_log.push_back(std::move(bits));
  }
  return out;
}

void attach_instruction_attack(std::vector<corpus::QARecord>& records, llm::Gateway& gateway,
                               const std::string& attack_name, const llm::InstructionList& list,
                               const corpus::TaskSpec& task, std::size_t max_in_flight) {
  std::vector<llm::Request> requests;
  requests.reserve(records.size());
  for (const auto& r : records) {
    auto t = task;
    t.instance = r.question;
    requests.push_back({llm::render_prompt(t, list), {1.0, 600, std::nullopt}, 0});
  }
  const auto batch = gateway.batch_generate(requests, max_in_flight);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& out = batch.outputs[i];
    if (out && !llm::is_refusal(*out)) records[i].generations[attack_name] = *out;
  }
}

void attach_paraphrase_attack(std::vector<corpus::QARecord>& records, llm::Gateway& gateway, int min_words,
                              std::size_t max_in_flight) {
  std::vector<llm::Request> requests;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto base = records[i].base_generation();
    if (!base) continue;
    requests.push_back({llm::render_para(*base, min_words), {1.0, 600, std::nullopt}, 0});
    owner.push_back(i);
  }
  const auto batch = gateway.batch_generate(requests, max_in_flight);
  for (std::size_t j = 0; j < owner.size(); ++j) {
    const auto& out = batch.outputs[j];
    if (out && !llm::is_refusal(*out)) records[owner[j]].generations[std::string(kParaAttack)] = *out;
  }
}

AttackOutcome run_e2e_attack(const llm::MockScenario& scenario, const E2EConfig& cfg) {
  const auto calls_before = net::call_count();
  const std::size_t total = cfg.n_detector_train + cfg.n_tr + cfg.n_val + cfg.n_test;
  const auto corpus = synth_corpus(scenario, total);
  const auto gateway = make_gateway(scenario, cfg);

  AttackOutcome out;
  std::vector<detect::LabeledText> train;
  for (std::size_t i = 0; i < cfg.n_detector_train; ++i) {
    const auto& r = corpus.records[i];
    out.detector_train_ids.push_back(r.id);
    train.push_back({r.human_answer, detect::Label::Human});
    if (const auto base = r.base_generation(); base && !llm::is_refusal(*base)) {
      train.push_back({std::string(*base), detect::Label::AI});
    }
  }
  out.model = std::make_shared<detect::LinearNgramModel>(detect::train_linear(train, cfg.hyper));
  const detect::LinearDetector detector(out.model);

  std::size_t at = cfg.n_detector_train;
  const auto d_tr = slice(corpus, at, cfg.n_tr, corpus::SplitName::Train);
  at += cfg.n_tr;
  const auto d_val = slice(corpus, at, cfg.n_val, corpus::SplitName::Validation);
  at += cfg.n_val;
  out.test_records = slice(corpus, at, cfg.n_test, corpus::SplitName::Test).records;

  out.failopt = opt::run_failopt(cfg.failopt, d_tr, d_val, *gateway, detector, opt::RunOptions{cfg.run_dir, false});
  detail::log().info("testbed {}: final list of {} instruction(s), rate {:.4f} from {:.4f}", scenario.id,
                     out.failopt.final_list.size(), out.failopt.final_rate, out.failopt.baseline_rate);

  attach_paraphrase_attack(out.test_records, *gateway, cfg.failopt.min_words, cfg.failopt.max_in_flight);
  attach_instruction_attack(out.test_records, *gateway, std::string(kFailoptAttack), out.failopt.final_list,
                            eli5_task(cfg.failopt), cfg.failopt.max_in_flight);

  const auto policy = eval::TauPolicy::default_for(detector);
  const std::string task = "synthetic/" + scenario.id;
  out.base_report =
      eval::evaluate_attack(detector, out.test_records, std::string(corpus::kBaseGeneration), task, policy, cfg.eval);
  out.para_report = eval::evaluate_attack(detector, out.test_records, std::string(kParaAttack), task, policy, cfg.eval);
  out.attacked_report =
      eval::evaluate_attack(detector, out.test_records, std::string(kFailoptAttack), task, policy, cfg.eval);
  out.network_calls = net::call_count() - calls_before;
  return out;
}

DefenseOutcome run_e2e_defense(const llm::MockScenario& scenario, const E2EConfig& cfg,
                               augment::AugmentationPlan plan, const RetrainConfig& retrain) {
  DefenseOutcome out;
  out.attack = run_e2e_attack(scenario, cfg);
  if (plan.failopt_instructions.empty()) plan.failopt_instructions = out.attack.failopt.final_list;
  if (plan.size_sweep.empty()) throw Error(Errc::Config, "the size sweep is empty");

  // Fresh questions past every record the attack used.
  const std::size_t first = cfg.n_detector_train + cfg.n_tr + cfg.n_val + cfg.n_test;
  const std::size_t largest = *std::max_element(plan.size_sweep.begin(), plan.size_sweep.end());
  const auto fresh = synth_corpus(scenario, largest, first);
  plan.questions.clear();
  for (const auto& r : fresh.records) plan.questions.push_back(r.id);
  plan.excluded_ids = out.attack.detector_train_ids;
  plan.task = eli5_task(cfg.failopt);

  const auto gateway = make_gateway(scenario, cfg);
  out.samples = augment::build_augmented_dataset(plan, *gateway, corpus::DatasetSplit{corpus::SplitName::Train, fresh.records});

  augment::LinearTrainer trainer(retrain.hyper, out.attack.model, retrain.warm_start, retrain.scale_steps);
  augment::EvalSuite suite;
  suite.records = out.attack.test_records;
  suite.attacks = {std::string(corpus::kBaseGeneration), std::string(kFailoptAttack)};
  suite.task = "synthetic/" + scenario.id;
  suite.tau_policy = eval::TauPolicy::fixed(0.5);
  suite.config = cfg.eval;
  out.grid = augment::run_ablation(plan, out.samples, trainer, suite);
  out.trajectory = augment::human_score_trajectory(out.grid);
  return out;
}

}  // namespace failopt::testbed
