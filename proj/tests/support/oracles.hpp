#pragma once

// Brute-force reference implementations, written from the definitions and
// kept independent of the library code they check.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "failopt/detect/detector.hpp"

namespace failopt::test::oracle {

/// O(n^2) pair count: P(ai > human) + 0.5 P(tie).
inline double auroc_pairs(const std::vector<double>& human, const std::vector<double>& ai) {
  double wins = 0.0;
  for (double a : ai) {
    for (double h : human) wins += a > h ? 1.0 : (a == h ? 0.5 : 0.0);
  }
  return wins / (static_cast<double>(ai.size()) * static_cast<double>(human.size()));
}

inline double f1(const std::vector<double>& scores, const std::vector<detect::Label>& labels, double tau) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted_ai = scores[i] >= tau;
    const bool is_ai = labels[i] == detect::Label::AI;
    tp += predicted_ai && is_ai;
    fp += predicted_ai && !is_ai;
    fn += !predicted_ai && is_ai;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

/// Max F1 over every threshold position: below all scores, between each
/// adjacent pair of distinct scores, above all scores.
inline double best_f1_sweep(const std::vector<double>& scores, const std::vector<detect::Label>& labels) {
  auto sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<double> taus{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) taus.push_back(sorted[i] + (sorted[i + 1] - sorted[i]) / 2);
  for (double s : sorted) taus.push_back(s);
  double best = 0.0;
  for (double t : taus) best = std::max(best, f1(scores, labels, t));
  return best;
}

inline std::optional<double> asr_recount(const std::vector<detect::Label>& base,
                                         const std::vector<detect::Label>& attacked) {
  std::size_t detected = 0, flipped = 0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (base[i] != detect::Label::AI) continue;
    ++detected;
    flipped += attacked[i] == detect::Label::Human;
  }
  if (detected == 0) return std::nullopt;
  return static_cast<double>(flipped) / static_cast<double>(detected);
}

}  // namespace failopt::test::oracle
