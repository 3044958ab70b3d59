#pragma once

#include <span>
#include <string>
#include <vector>

namespace failopt::detect {

/// f(g) with a fixed orientation: larger ai_score means more AI-like.
struct DetectorScore {
  double ai_score = 0.0;
  double raw = 0.0;  // the detector's native value, e.g. perplexity
  std::string detector_id;
};

enum class ThresholdSource { Fixed, BestF1Calibrated };

struct Threshold {
  double tau = 0.5;
  ThresholdSource source = ThresholdSource::Fixed;
};

enum class Label { Human, AI };

std::string_view to_string(Label label) noexcept;

class Detector {
 public:
  virtual ~Detector() = default;

  virtual std::string id() const = 0;
  virtual DetectorScore score(const std::string& text) const = 0;

  /// Order-preserving; the default scores one text at a time.
  virtual std::vector<DetectorScore> score_batch(std::span<const std::string> texts) const;

  /// True when ai_score is a class probability in [0, 1].
  virtual bool probabilistic() const = 0;
};

/// AI iff ai_score >= tau.
Label classify(double ai_score, const Threshold& th) noexcept;
Label classify(const Detector& detector, const std::string& text, const Threshold& th);

}  // namespace failopt::detect
