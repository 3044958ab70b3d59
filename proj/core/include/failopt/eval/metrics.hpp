#pragma once

#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "failopt/detect/detector.hpp"

namespace failopt::eval {

/// Mann-Whitney AUROC: P(ai > human) + 0.5 P(tie). Throws EmptyClass.
double auroc(std::span<const double> human_scores, std::span<const double> ai_scores);

/// Among inputs labeled AI before the attack, the fraction labeled Human
/// after it. nullopt when nothing was labeled AI before. Throws LengthMismatch.
std::optional<double> asr(std::span<const detect::Label> base, std::span<const detect::Label> attacked);

struct F1Threshold {
  detect::Threshold threshold;
  double f1 = 0.0;
};

/// F1 of the AI class at 1(score >= tau).
double f1_at(std::span<const double> scores, std::span<const detect::Label> labels, double tau);

/// Sweeps -inf, the midpoints between consecutive distinct scores and +inf;
/// returns the best-F1 tau, ties toward the larger tau. Throws DegenerateData
/// unless both labels are present.
F1Threshold best_f1_threshold(std::span<const double> scores, std::span<const detect::Label> labels);

/// hs(g) = 1 - f(g). Throws OutOfRange outside [0, 1].
double human_score(double ai_score);
/// Also throws OutOfRange for detectors whose scores are not probabilities.
double human_score(const detect::Detector& detector, const detect::DetectorScore& score);

/// How the labeling threshold is chosen.
struct TauPolicy {
  enum class Kind { Fixed, BestF1OnBase };
  Kind kind = Kind::Fixed;
  double tau = 0.5;

  static TauPolicy fixed(double tau) { return {Kind::Fixed, tau}; }
  static TauPolicy best_f1_on_base() { return {Kind::BestF1OnBase, 0.0}; }
  /// Fixed(0.5) for probability outputs, BestF1OnBase otherwise.
  static TauPolicy default_for(const detect::Detector& detector);
};

void to_json(nlohmann::json& j, const TauPolicy& p);
void from_json(const nlohmann::json& j, TauPolicy& p);

/// JSON number for finite values, "inf" / "-inf" otherwise.
nlohmann::json threshold_to_json(double tau);
double threshold_from_json(const nlohmann::json& j);

}  // namespace failopt::eval
