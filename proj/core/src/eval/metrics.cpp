#include "failopt/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "failopt/error.hpp"

namespace failopt::eval {
namespace {

using detect::Label;

struct Counts {
  long long tp = 0, fp = 0, fn = 0;
};

// F1 = 2tp / (2tp + fp + fn), compared exactly as fractions. Denominators are
// positive because tp + fn is the AI count. Products fit for n below 1e9.
bool f1_greater(const Counts& a, const Counts& b) {
  const long long an = 2 * a.tp, ad = 2 * a.tp + a.fp + a.fn;
  const long long bn = 2 * b.tp, bd = 2 * b.tp + b.fp + b.fn;
  return an * bd > bn * ad;
}

double f1_value(const Counts& c) {
  const long long d = 2 * c.tp + c.fp + c.fn;
  return d == 0 ? 0.0 : static_cast<double>(2 * c.tp) / static_cast<double>(d);
}

}  // namespace

double auroc(std::span<const double> human_scores, std::span<const double> ai_scores) {
  if (human_scores.empty() || ai_scores.empty()) throw Error(Errc::EmptyClass, "AUROC needs both classes");
  for (double s : human_scores) {
    if (std::isnan(s)) throw Error(Errc::NonFinite, "NaN score");
  }
  for (double s : ai_scores) {
    if (std::isnan(s)) throw Error(Errc::NonFinite, "NaN score");
  }
  // Rank formulation: for each AI score, count human scores below and tied.
  std::vector<double> h(human_scores.begin(), human_scores.end());
  std::sort(h.begin(), h.end());
  double wins2 = 0.0;  // twice the win count keeps ties integral
  for (double a : ai_scores) {
    const auto lo = std::lower_bound(h.begin(), h.end(), a);
    const auto hi = std::upper_bound(lo, h.end(), a);
    wins2 += 2.0 * static_cast<double>(lo - h.begin()) + static_cast<double>(hi - lo);
  }
  return wins2 / (2.0 * static_cast<double>(h.size()) * static_cast<double>(ai_scores.size()));
}

std::optional<double> asr(std::span<const Label> base, std::span<const Label> attacked) {
  if (base.size() != attacked.size()) throw Error(Errc::LengthMismatch, "ASR label lists differ in length");
  std::size_t detected = 0, evaded = 0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (base[i] != Label::AI) continue;
    ++detected;
    if (attacked[i] == Label::Human) ++evaded;
  }
  if (detected == 0) return std::nullopt;
  return static_cast<double>(evaded) / static_cast<double>(detected);
}

double f1_at(std::span<const double> scores, std::span<const Label> labels, double tau) {
  if (scores.size() != labels.size()) throw Error(Errc::LengthMismatch, "scores and labels differ in length");
  Counts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= tau;
    const bool ai = labels[i] == Label::AI;
    c.tp += pred && ai;
    c.fp += pred && !ai;
    c.fn += !pred && ai;
  }
  return f1_value(c);
}

F1Threshold best_f1_threshold(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw Error(Errc::LengthMismatch, "scores and labels differ in length");
  const auto n_ai = static_cast<long long>(std::count(labels.begin(), labels.end(), Label::AI));
  if (n_ai == 0 || n_ai == static_cast<long long>(labels.size())) {
    throw Error(Errc::DegenerateData, "best-F1 threshold needs both labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  for (double s : scores) {
    if (std::isnan(s)) throw Error(Errc::NonFinite, "NaN score");
  }
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

  // Walk thresholds from +inf downwards; each distinct score joins the positives.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Counts c{0, 0, n_ai};
  Counts best_c = c;
  double best_tau = kInf;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      if (labels[order[i]] == Label::AI) {
        ++c.tp;
        --c.fn;
      } else {
        ++c.fp;
      }
    }
    double tau = -kInf;
    if (i < order.size()) {
      const double below = scores[order[i]];
      tau = below / 2 + s / 2;
      if (!(tau > below) || tau > s) tau = s;
    }
    // Strictly greater keeps the earlier, larger tau on ties.
    if (f1_greater(c, best_c)) {
      best_c = c;
      best_tau = tau;
    }
  }
  return {detect::Threshold{best_tau, detect::ThresholdSource::BestF1Calibrated}, f1_value(best_c)};
}

double human_score(double ai_score) {
  if (!(ai_score >= 0.0 && ai_score <= 1.0)) {
    throw Error(Errc::OutOfRange, "human score needs an AI probability in [0, 1]");
  }
  return 1.0 - ai_score;
}

double human_score(const detect::Detector& detector, const detect::DetectorScore& score) {
  if (!detector.probabilistic()) {
    throw Error(Errc::OutOfRange, "human score is undefined for metric detector " + detector.id());
  }
  return human_score(score.ai_score);
}

TauPolicy TauPolicy::default_for(const detect::Detector& detector) {
  return detector.probabilistic() ? fixed(0.5) : best_f1_on_base();
}

void to_json(nlohmann::json& j, const TauPolicy& p) {
  if (p.kind == TauPolicy::Kind::Fixed) j = {{"kind", "Fixed"}, {"tau", threshold_to_json(p.tau)}};
  else j = {{"kind", "BestF1OnBase"}};
}

void from_json(const nlohmann::json& j, TauPolicy& p) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "Fixed") p = TauPolicy::fixed(j.contains("tau") ? threshold_from_json(j.at("tau")) : 0.5);
  else if (kind == "BestF1OnBase") p = TauPolicy::best_f1_on_base();
  else throw Error(Errc::Config, "unknown tau policy '" + kind + "'");
}

nlohmann::json threshold_to_json(double tau) {
  if (std::isinf(tau)) return tau > 0 ? "inf" : "-inf";
  if (std::isnan(tau)) throw Error(Errc::NonFinite, "NaN threshold");
  return tau;
}

double threshold_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  throw Error(Errc::Parse, "bad threshold value '" + s + "'");
}

}  // namespace failopt::eval
