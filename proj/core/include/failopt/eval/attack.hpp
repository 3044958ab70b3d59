#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "failopt/corpus/text.hpp"
#include "failopt/corpus/types.hpp"
#include "failopt/detect/detector.hpp"
#include "failopt/eval/metrics.hpp"

namespace failopt::eval {

struct EvalConfig {
  corpus::LengthBounds bounds;
  std::size_t max_records = 200;
  std::size_t min_records = 10;
};

/// Scores of one evaluated record, all taken on the truncated texts.
struct SampleScores {
  std::string id;
  std::size_t token_count = 0;  // shared length of the truncated triple
  double human_text_score = 0.0;
  double base_score = 0.0;
  double attacked_score = 0.0;
  std::optional<double> human_score;  // hs of the attacked generation, probability detectors only
};

struct EvalReport {
  std::string detector_id;
  std::string attack_name;
  std::string task;
  double auroc = 0.0;       // human vs attacked
  double base_auroc = 0.0;  // human vs base, recomputed for this attack's sample set
  std::optional<double> asr;
  double best_f1_tau = 0.0;  // calibrated on human vs base
  double tau = 0.0;          // threshold actually used for labels
  std::size_t n_samples = 0;
  std::size_t n_filtered_out = 0;
  std::vector<SampleScores> per_sample;

  /// Mean hs over attacked generations; nullopt for metric detectors.
  std::optional<double> mean_human_score() const;
};

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);
void save_report(const EvalReport& report, const std::filesystem::path& path);

/// Filters records by length, keeps the first cfg.max_records survivors,
/// truncates each (human, base, attacked) triple to its shortest member,
/// scores all three and derives AUROC, the best-F1 threshold and ASR.
/// Throws InsufficientData when fewer than cfg.min_records survive.
EvalReport evaluate_attack(const detect::Detector& detector, std::span<const corpus::QARecord> records,
                           const std::string& attack_name, const std::string& task,
                           const TauPolicy& tau_policy, const EvalConfig& cfg = {});

}  // namespace failopt::eval
