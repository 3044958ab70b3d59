#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "failopt/augment/augment.hpp"
#include "failopt/corpus/types.hpp"
#include "failopt/detect/linear.hpp"
#include "failopt/eval/attack.hpp"
#include "failopt/llm/gateway.hpp"
#include "failopt/llm/mock.hpp"
#include "failopt/opt/failopt.hpp"

namespace failopt::testbed {

/// Attack names used for generations stored on testbed records.
inline constexpr std::string_view kParaAttack = "PARA";
inline constexpr std::string_view kFailoptAttack = "FAILOpt";

struct SyntheticCorpus {
  std::string scenario_id;
  std::vector<corpus::QARecord> records;  // base answers under corpus::kBaseGeneration
  /// Per record, whether each scenario marker (scenario order) occurs in the base answer.
  std::vector<std::vector<bool>> generation_log;
};

/// Records first_index .. first_index + n_records - 1 of the scenario's
/// endless synthetic corpus. Base answers come from the mock model on the
/// base prompt, so they equal what an optimizer run generates for them.
SyntheticCorpus synth_corpus(const llm::MockScenario& scenario, std::size_t n_records,
                             std::size_t first_index = 0);

/// Stores gateway generations of `list`-prompted answers under `attack_name`.
/// Failed or refused generations leave the record without that attack.
void attach_instruction_attack(std::vector<corpus::QARecord>& records, llm::Gateway& gateway,
                               const std::string& attack_name, const llm::InstructionList& list,
                               const corpus::TaskSpec& task, std::size_t max_in_flight = 4);

/// Stores paraphrases of each base generation under kParaAttack.
void attach_paraphrase_attack(std::vector<corpus::QARecord>& records, llm::Gateway& gateway,
                              int min_words = 300, std::size_t max_in_flight = 4);

/// Record layout of the end-to-end drivers: consecutive index ranges of one
/// synthetic corpus for detector training, D_tr, D_val and the test set.
struct E2EConfig {
  opt::FailoptConfig failopt;
  std::size_t n_detector_train = 300;
  std::size_t n_tr = 100;
  std::size_t n_val = 100;
  std::size_t n_test = 200;
  detect::LinearHyper hyper;
  eval::EvalConfig eval;
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::filesystem::path> run_dir;  // optimizer persistence
};

struct AttackOutcome {
  std::shared_ptr<const detect::LinearNgramModel> model;  // detector trained on human vs base answers
  std::vector<std::string> detector_train_ids;
  std::vector<corpus::QARecord> test_records;  // with N/A, PARA and FAILOpt generations
  eval::EvalReport base_report;                // attacked = base
  eval::EvalReport para_report;
  eval::EvalReport attacked_report;            // FAILOpt
  opt::FailoptResult failopt;
  std::size_t network_calls = 0;
};

/// Trains the linear detector on human vs base answers, optimizes an
/// instruction list against it with the mock model and evaluates every attack
/// on the held-out test records.
AttackOutcome run_e2e_attack(const llm::MockScenario& scenario, const E2EConfig& cfg);

struct RetrainConfig {
  detect::LinearHyper hyper;
  bool warm_start = false;   // continue from the attacked detector instead of training afresh
  bool scale_steps = false;  // step budget grows with the size point
};

struct DefenseOutcome {
  AttackOutcome attack;
  std::vector<augment::TrainingSample> samples;
  augment::AblationResult grid;
  std::vector<augment::TrajectoryPoint> trajectory;
};

/// Runs the attack, builds the augmented set from fresh synthetic questions
/// (the plan's question list is filled in here) and runs the ablation. The
/// attacked detector is the NoTrain arm. An empty plan instruction list takes
/// the optimizer's final list.
DefenseOutcome run_e2e_defense(const llm::MockScenario& scenario, const E2EConfig& cfg,
                               augment::AugmentationPlan plan, const RetrainConfig& retrain);

}  // namespace failopt::testbed
