#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "failopt/corpus/types.hpp"
#include "failopt/detect/detector.hpp"
#include "failopt/detect/linear.hpp"
#include "failopt/eval/attack.hpp"
#include "failopt/llm/gateway.hpp"
#include "failopt/llm/prompt.hpp"

namespace failopt::augment {

enum class Source { Human, BaseAIGT, FailoptAIGT };
enum class Granularity { FullAnswer, Sentence };

std::string_view to_string(Source s) noexcept;
std::string_view to_string(Granularity g) noexcept;

/// Training-data arms of the ablation. NoTrain is the untouched detector.
enum class Arm { NoTrain, Full, MinusBase, MinusFailopt };

std::string_view to_string(Arm a) noexcept;
Arm parse_arm(std::string_view name);

/// Sources an arm trains on.
std::set<Source> arm_sources(Arm a);

struct AugmentationPlan {
  std::vector<std::string> questions;  // record ids of the base corpus, in order
  std::set<Source> sources{Source::Human, Source::BaseAIGT, Source::FailoptAIGT};
  llm::InstructionList failopt_instructions;
  bool sentence_expand = true;
  std::vector<std::size_t> size_sweep{500, 1000, 2000};  // texts per source
  std::vector<std::string> excluded_ids;                 // e.g. ids of the detector's own training data
  corpus::TaskSpec task;                                 // instance is filled per question
  double temperature = 1.0;
  int max_tokens = 600;
  std::size_t max_in_flight = 4;
  std::vector<Arm> arms{Arm::NoTrain, Arm::Full, Arm::MinusBase, Arm::MinusFailopt};
  std::size_t n_seeds = 5;
  std::uint64_t seed = 17;
  /// Arms trained with every seed; the others use the first seed only.
  std::vector<Arm> multi_seed_arms{Arm::Full, Arm::MinusBase, Arm::MinusFailopt};

  /// Throws Config when Human or every AI source is missing, or when a
  /// planned question is on the exclusion list.
  void validate() const;
};

struct TrainingSample {
  std::string text;
  detect::Label label = detect::Label::Human;
  Granularity granularity = Granularity::FullAnswer;
  Source source = Source::Human;
  std::string question_id;

  bool operator==(const TrainingSample&) const = default;
};

/// The four instructions used for augmentation, verbatim.
llm::InstructionList default_failopt_instructions();

/// Per question and source: the full answer plus, with sentence expansion, one
/// sample per sentence. Ordered by question, then source, then sentence.
/// Refused or failed generations are dropped with a warning. Throws
/// MissingHumanAnswer when the corpus has no human answer for a question.
std::vector<TrainingSample> build_augmented_dataset(const AugmentationPlan& plan, llm::Gateway& gateway,
                                                    const corpus::DatasetSplit& base_corpus);

void to_json(nlohmann::json& j, const TrainingSample& s);
void from_json(const nlohmann::json& j, TrainingSample& s);
void save_samples_jsonl(std::span<const TrainingSample> samples, const std::filesystem::path& path);

/// Trains detectors on subsets of one prepared sample pool.
class DetectorTrainer {
 public:
  virtual ~DetectorTrainer() = default;
  virtual std::string id() const = 0;
  /// Called once with the whole pool before any train().
  virtual void prepare(std::span<const TrainingSample> pool) = 0;
  /// `data_scale` is the size point over the smallest size of the sweep.
  virtual std::shared_ptr<const detect::Detector> train(std::span<const std::size_t> sample_indices,
                                                        std::uint64_t seed, double data_scale) = 0;
  /// The detector before any augmentation.
  virtual std::shared_ptr<const detect::Detector> untrained() const = 0;
};

/// Linear n-gram trainer. Features are computed once in prepare(). The base
/// model is the untrained detector; with warm_start each arm continues
/// training from it instead of starting afresh. With scale_steps the step
/// budget is hyper.max_iters times data_scale, as in fixed-epoch training.
class LinearTrainer final : public DetectorTrainer {
 public:
  LinearTrainer(detect::LinearHyper hyper, std::shared_ptr<const detect::LinearNgramModel> base_model,
                bool warm_start = false, bool scale_steps = false);

  std::string id() const override { return "linear"; }
  void prepare(std::span<const TrainingSample> pool) override;
  std::shared_ptr<const detect::Detector> train(std::span<const std::size_t> sample_indices,
                                                std::uint64_t seed, double data_scale) override;
  std::shared_ptr<const detect::Detector> untrained() const override;

 private:
  detect::LinearHyper hyper_;
  std::shared_ptr<const detect::LinearNgramModel> base_;
  bool warm_start_ = false;
  bool scale_steps_ = false;
  std::vector<detect::FeatureVector> features_;
  std::vector<std::uint8_t> labels_;
};

/// Records with human, base and attacked generations for every attack listed.
struct EvalSuite {
  std::vector<corpus::QARecord> records;
  std::vector<std::string> attacks;
  std::string task;
  eval::TauPolicy tau_policy = eval::TauPolicy::fixed(0.5);
  eval::EvalConfig config;
};

struct AblationRow {
  Arm arm = Arm::NoTrain;
  std::size_t size = 0;  // texts per source; 0 for NoTrain
  std::size_t seed_index = 0;
  eval::EvalReport report;
};

struct AblationFailure {
  Arm arm = Arm::NoTrain;
  std::size_t size = 0;
  std::size_t seed_index = 0;
  std::string message;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<AblationFailure> failures;
};

/// One detector per (arm, size, seed), each evaluated on every suite attack.
/// Questions for a size are a seeded draw from those with samples from every
/// planned source, so per-source counts are equal. A failing arm is recorded
/// and the others continue.
AblationResult run_ablation(const AugmentationPlan& plan, std::span<const TrainingSample> samples,
                            DetectorTrainer& trainer, const EvalSuite& suite);

/// Header: arm,size,seed,detector,attack,task,auroc,asr,mean_human_score
std::string ablation_csv(const AblationResult& result);

struct TrajectoryPoint {
  Arm arm = Arm::Full;
  std::string attack;
  std::size_t size = 0;
  std::size_t n_seeds = 0;
  double median_human_score = 0.0;  // median over seeds of the mean attacked hs
  double ratio = 1.0;               // against the smallest size
};

/// Human-score trajectory of each trained arm and attack over the size sweep.
/// Rows without a human score (metric detectors) are skipped.
std::vector<TrajectoryPoint> human_score_trajectory(const AblationResult& result);

/// Header: arm,attack,size,n_seeds,median_human_score,ratio_to_smallest
std::string trajectory_csv(std::span<const TrajectoryPoint> points);

}  // namespace failopt::augment
