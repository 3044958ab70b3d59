#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "failopt/corpus/types.hpp"
#include "failopt/detect/detector.hpp"
#include "failopt/eval/metrics.hpp"
#include "failopt/llm/gateway.hpp"
#include "failopt/llm/prompt.hpp"

namespace failopt::opt {

enum class MutationKind { Root, NewInstruction, Paraphrase };

std::string_view to_string(MutationKind kind) noexcept;

struct Candidate {
  std::size_t id = 0;
  llm::InstructionList list;
  std::optional<double> detection_rate;
  std::optional<std::size_t> parent;
  MutationKind lineage = MutationKind::Root;
  std::size_t n_generated = 0;  // successful generations behind detection_rate
  std::size_t n_failed = 0;
  bool disqualified = false;
};

struct FeedbackList {
  std::vector<std::string> items;
};

/// Which end of the ranking getTopK keeps.
enum class RankOrder {
  LowestRate,   // lists that best elude the detector
  HighestRate,  // literal descending sort of the pseudo-code, for ablation
};

struct Temperatures {
  double feedback = 0.0;
  double convert = 0.0;
  double generate = 1.0;
  double paraphrase = 1.0;
};

struct FailoptConfig {
  std::size_t n_feed = 10;
  std::size_t batch_tr = 4;
  std::size_t batch_val = 32;
  std::size_t n_para = 2;
  std::size_t k = 2;
  std::size_t step_max = 6;
  /// nullopt picks TauPolicy::default_for(detector).
  std::optional<eval::TauPolicy> tau_policy;
  Temperatures temps;
  int max_tokens = 600;
  std::uint64_t seed = 17;
  corpus::TaskTemplate task = corpus::TaskTemplate::Eli5;
  std::string task_description;  // Custom template header
  int min_words = 300;
  RankOrder order = RankOrder::LowestRate;
  bool frozen_batches = false;    // sample B_tr and B_val once instead of every step
  bool keep_previous_beam = true;  // previous beam competes in each final selection
  double max_failure_fraction = 0.25;
  std::size_t max_in_flight = 4;

  void validate() const;
};

void to_json(nlohmann::json& j, const FailoptConfig& c);
void from_json(const nlohmann::json& j, FailoptConfig& c);

/// Target detector plus the threshold its detection rate is measured at.
struct Target {
  const detect::Detector* detector = nullptr;
  double tau = 0.5;
};

/// (1/N) sum 1(score >= tau). Throws EmptyBatch.
double detection_rate(std::span<const double> ai_scores, double tau);

/// p_disc over one batch: G1 = human texts, G2 = AI texts. Retries once when
/// fewer than n_feed items parse, then throws ParseShortfall.
FeedbackList generate_feedback(llm::Gateway& gateway, std::span<const std::string> human_texts,
                               std::span<const std::string> ai_texts, std::size_t n_feed,
                               const llm::GenerationParams& params);

/// p_ins: one instruction per feedback item, in order. Instructions that
/// mention G1 or G2 are dropped with a warning.
std::vector<std::string> feedback_to_instructions(llm::Gateway& gateway, const FeedbackList& feedback,
                                                  const llm::GenerationParams& params);

/// [s] ++ L for every beam list L and new instruction s, skipping s already in L.
/// `next_id` numbers the new candidates.
std::vector<Candidate> expand_candidates(std::span<const Candidate> beam,
                                         std::span<const std::vector<std::string>> new_instructions,
                                         std::size_t& next_id);

/// Ranks rated, qualified candidates: rate per `order`, then shorter list,
/// then lexicographically smaller first instruction, then input position.
std::vector<Candidate> select_top_k(std::span<const Candidate> candidates, std::size_t k,
                                    RankOrder order = RankOrder::LowestRate);

/// Shared context of the candidate-evaluating operations.
struct EvalContext {
  llm::Gateway* gateway = nullptr;
  Target target;
  const FailoptConfig* cfg = nullptr;
};

/// Generates one response per (candidate, record), measures each candidate's
/// detection rate and returns select_top_k. Candidates with more than
/// max_failure_fraction failed or refused generations are disqualified.
std::vector<Candidate> get_top_k(const EvalContext& ctx, std::vector<Candidate> candidates,
                                 std::span<const corpus::QARecord> batch_val, std::size_t k);

/// Rates every candidate in place on `records`.
void measure(const EvalContext& ctx, std::span<Candidate> candidates, std::span<const corpus::QARecord> records);

/// Originals plus up to n_para variants of each candidate in which only the
/// newest instruction is replaced by a p_MC paraphrase. Root candidates pass
/// through; identical or duplicate paraphrases are skipped.
std::vector<Candidate> paraphrase_mutation(llm::Gateway& gateway, std::span<const Candidate> top_k,
                                           std::size_t n_para, const llm::GenerationParams& params,
                                           std::size_t& next_id);

struct StepSummary {
  std::size_t step = 0;
  std::vector<Candidate> beam;
  std::size_t n_evaluated = 0;
};

struct FailoptResult {
  llm::InstructionList final_list;
  double final_rate = 0.0;     // on the full validation split
  double baseline_rate = 0.0;  // empty list, full validation split
  double tau = 0.5;
  std::vector<StepSummary> steps;
  std::vector<Candidate> finalists;  // every list that entered a beam, re-measured
};

struct RunOptions {
  std::optional<std::filesystem::path> run_dir;  // persistence target
  bool resume = false;                           // continue from run_dir/checkpoint.json
};

/// Beam search over instruction lists; see FailoptConfig for the knobs.
/// With a run directory, every evaluated candidate goes to steps.jsonl and a
/// checkpoint is written after each completed step.
FailoptResult run_failopt(const FailoptConfig& cfg, const corpus::DatasetSplit& d_tr,
                          const corpus::DatasetSplit& d_val, llm::Gateway& gateway,
                          const detect::Detector& detector, const RunOptions& options = {});

void save_final_list(const FailoptResult& result, const std::filesystem::path& path);
llm::InstructionList load_final_list(const std::filesystem::path& path);

}  // namespace failopt::opt
