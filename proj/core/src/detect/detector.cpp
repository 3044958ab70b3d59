#include "failopt/detect/detector.hpp"

namespace failopt::detect {

std::string_view to_string(Label label) noexcept { return label == Label::AI ? "AI" : "Human"; }

std::vector<DetectorScore> Detector::score_batch(std::span<const std::string> texts) const {
  std::vector<DetectorScore> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(score(t));
  return out;
}

Label classify(double ai_score, const Threshold& th) noexcept {
  return ai_score >= th.tau ? Label::AI : Label::Human;
}

Label classify(const Detector& detector, const std::string& text, const Threshold& th) {
  return classify(detector.score(text).ai_score, th);
}

}  // namespace failopt::detect
