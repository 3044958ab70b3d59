#include "failopt/eval/attack.hpp"

#include <fstream>

#include "failopt/error.hpp"

namespace failopt::eval {

std::optional<double> EvalReport::mean_human_score() const {
  if (per_sample.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& s : per_sample) {
    if (!s.human_score) return std::nullopt;
    sum += *s.human_score;
  }
  return sum / static_cast<double>(per_sample.size());
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : r.per_sample) {
    samples.push_back({{"id", s.id},
                       {"token_count", s.token_count},
                       {"human_text_score", s.human_text_score},
                       {"base_score", s.base_score},
                       {"attacked_score", s.attacked_score},
                       {"human_score", s.human_score ? nlohmann::json(*s.human_score) : nlohmann::json()}});
  }
  j = {{"detector_id", r.detector_id},
       {"attack_name", r.attack_name},
       {"task", r.task},
       {"auroc", r.auroc},
       {"base_auroc", r.base_auroc},
       {"asr", r.asr ? nlohmann::json(*r.asr) : nlohmann::json()},
       {"best_f1_tau", threshold_to_json(r.best_f1_tau)},
       {"tau", threshold_to_json(r.tau)},
       {"n_samples", r.n_samples},
       {"n_filtered_out", r.n_filtered_out},
       {"per_sample", samples}};
}

void from_json(const nlohmann::json& j, EvalReport& r) {
  r.detector_id = j.at("detector_id").get<std::string>();
  r.attack_name = j.at("attack_name").get<std::string>();
  r.task = j.at("task").get<std::string>();
  r.auroc = j.at("auroc").get<double>();
  r.base_auroc = j.at("base_auroc").get<double>();
  r.asr = j.at("asr").is_null() ? std::nullopt : std::optional<double>(j.at("asr").get<double>());
  r.best_f1_tau = threshold_from_json(j.at("best_f1_tau"));
  r.tau = threshold_from_json(j.at("tau"));
  r.n_samples = j.at("n_samples").get<std::size_t>();
  r.n_filtered_out = j.at("n_filtered_out").get<std::size_t>();
  r.per_sample.clear();
  for (const auto& s : j.at("per_sample")) {
    SampleScores x;
    x.id = s.at("id").get<std::string>();
    x.token_count = s.at("token_count").get<std::size_t>();
    x.human_text_score = s.at("human_text_score").get<double>();
    x.base_score = s.at("base_score").get<double>();
    x.attacked_score = s.at("attacked_score").get<double>();
    if (!s.at("human_score").is_null()) x.human_score = s.at("human_score").get<double>();
    r.per_sample.push_back(std::move(x));
  }
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out << nlohmann::json(report).dump(2) << '\n';
  if (!out) throw Error(Errc::Io, "cannot write report " + path.string());
}

EvalReport evaluate_attack(const detect::Detector& detector, std::span<const corpus::QARecord> records,
                           const std::string& attack_name, const std::string& task,
                           const TauPolicy& tau_policy, const EvalConfig& cfg) {
  EvalReport r;
  r.detector_id = detector.id();
  r.attack_name = attack_name;
  r.task = task;

  std::vector<const corpus::QARecord*> kept;
  for (const auto& rec : records) {
    if (kept.size() >= cfg.max_records) break;
    if (corpus::length_filter(rec, attack_name, cfg.bounds)) kept.push_back(&rec);
    else ++r.n_filtered_out;
  }
  if (kept.size() < cfg.min_records) {
    throw Error(Errc::InsufficientData, std::to_string(kept.size()) + " records survive the length filter for '" +
                                            attack_name + "', need " + std::to_string(cfg.min_records));
  }

  // Layout: [human_0, base_0, attacked_0, human_1, ...].
  std::vector<std::string> texts;
  texts.reserve(kept.size() * 3);
  r.per_sample.reserve(kept.size());
  for (const auto* rec : kept) {
    const std::string triple[3] = {rec->human_answer, std::string(*rec->base_generation()),
                                   std::string(*rec->generation(attack_name))};
    auto cut = corpus::truncate_to_shortest(triple);
    SampleScores s;
    s.id = rec->id;
    s.token_count = corpus::count_tokens(cut[0]);
    r.per_sample.push_back(std::move(s));
    for (auto& t : cut) texts.push_back(std::move(t));
  }
  const auto scores = detector.score_batch(texts);
  if (scores.size() != texts.size()) throw Error(Errc::SchemaMismatch, "detector returned a short score batch");

  std::vector<double> human, base, attacked;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    auto& s = r.per_sample[i];
    s.human_text_score = scores[3 * i].ai_score;
    s.base_score = scores[3 * i + 1].ai_score;
    s.attacked_score = scores[3 * i + 2].ai_score;
    if (detector.probabilistic()) s.human_score = human_score(s.attacked_score);
    human.push_back(s.human_text_score);
    base.push_back(s.base_score);
    attacked.push_back(s.attacked_score);
  }
  r.n_samples = kept.size();
  r.auroc = auroc(human, attacked);
  r.base_auroc = auroc(human, base);

  std::vector<double> cal_scores = human;
  cal_scores.insert(cal_scores.end(), base.begin(), base.end());
  std::vector<detect::Label> cal_labels(human.size(), detect::Label::Human);
  cal_labels.resize(cal_scores.size(), detect::Label::AI);
  r.best_f1_tau = best_f1_threshold(cal_scores, cal_labels).threshold.tau;
  r.tau = tau_policy.kind == TauPolicy::Kind::Fixed ? tau_policy.tau : r.best_f1_tau;

  const detect::Threshold th{r.tau, tau_policy.kind == TauPolicy::Kind::Fixed
                                        ? detect::ThresholdSource::Fixed
                                        : detect::ThresholdSource::BestF1Calibrated};
  std::vector<detect::Label> base_labels, attacked_labels;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    base_labels.push_back(detect::classify(base[i], th));
    attacked_labels.push_back(detect::classify(attacked[i], th));
  }
  r.asr = asr(base_labels, attacked_labels);
  return r;
}

}  // namespace failopt::eval
