#include "failopt/augment/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "../log.hpp"
#include "failopt/corpus/text.hpp"
#include "failopt/error.hpp"
#include "failopt/eval/grid.hpp"
#include "failopt/llm/refusal.hpp"
#include "failopt/rng.hpp"

namespace failopt::augment {
namespace {

constexpr std::array<Source, 3> kSourceOrder{Source::Human, Source::BaseAIGT, Source::FailoptAIGT};

Source parse_source(std::string_view s) {
  for (auto src : kSourceOrder) {
    if (to_string(src) == s) return src;
  }
  throw Error(Errc::Parse, "unknown sample source '" + std::string(s) + "'");
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string_view to_string(Source s) noexcept {
  switch (s) {
    case Source::Human: return "Human";
    case Source::BaseAIGT: return "BaseAIGT";
    case Source::FailoptAIGT: return "FailoptAIGT";
  }
  return "Human";
}

std::string_view to_string(Granularity g) noexcept {
  return g == Granularity::FullAnswer ? "FullAnswer" : "Sentence";
}

std::string_view to_string(Arm a) noexcept {
  switch (a) {
    case Arm::NoTrain: return "No train";
    case Arm::Full: return "Full";
    case Arm::MinusBase: return "-N/A";
    case Arm::MinusFailopt: return "-FAILOpt";
  }
  return "Full";
}

Arm parse_arm(std::string_view name) {
  for (auto a : {Arm::NoTrain, Arm::Full, Arm::MinusBase, Arm::MinusFailopt}) {
    if (to_string(a) == name) return a;
  }
  if (name == "NoTrain") return Arm::NoTrain;
  if (name == "MinusBase") return Arm::MinusBase;
  if (name == "MinusFailopt") return Arm::MinusFailopt;
  throw Error(Errc::Config, "unknown ablation arm '" + std::string(name) + "'");
}

std::set<Source> arm_sources(Arm a) {
  switch (a) {
    case Arm::NoTrain: return {};
    case Arm::Full: return {Source::Human, Source::BaseAIGT, Source::FailoptAIGT};
    case Arm::MinusBase: return {Source::Human, Source::FailoptAIGT};
    case Arm::MinusFailopt: return {Source::Human, Source::BaseAIGT};
  }
  return {};
}

void AugmentationPlan::validate() const {
  if (!sources.contains(Source::Human)) throw Error(Errc::Config, "augmentation plans always include human answers");
  if (!sources.contains(Source::BaseAIGT) && !sources.contains(Source::FailoptAIGT)) {
    throw Error(Errc::Config, "augmentation plans need at least one AI source");
  }
  if (sources.contains(Source::FailoptAIGT) && failopt_instructions.empty()) {
    throw Error(Errc::Config, "the FAILOpt source needs a non-empty instruction list");
  }
  if (n_seeds < 1) throw Error(Errc::Config, "n_seeds must be at least 1");
  for (auto s : size_sweep) {
    if (s < 1) throw Error(Errc::Config, "sweep sizes must be positive");
  }
  const std::unordered_set<std::string> excluded(excluded_ids.begin(), excluded_ids.end());
  for (const auto& q : questions) {
    if (excluded.contains(q)) throw Error(Errc::Config, "question '" + q + "' is on the exclusion list");
  }
}

llm::InstructionList default_failopt_instructions() {
  return llm::InstructionList({
      "Incorporate witty remarks and irony to convey your message in your responses.",
      "Please provide structured and organized answers.",
      "Incorporate detailed instances and jargon into your responses.",
      "Incorporate humor or sarcasm into your responses.",
  });
}

std::vector<TrainingSample> build_augmented_dataset(const AugmentationPlan& plan, llm::Gateway& gateway,
                                                    const corpus::DatasetSplit& base_corpus) {
  plan.validate();
  std::unordered_map<std::string, const corpus::QARecord*> by_id;
  for (const auto& r : base_corpus.records) by_id.emplace(r.id, &r);

  std::vector<const corpus::QARecord*> records;
  for (const auto& q : plan.questions) {
    auto it = by_id.find(q);
    if (it == by_id.end() || it->second->human_answer.empty()) {
      throw Error(Errc::MissingHumanAnswer, "no human answer for question '" + q + "'");
    }
    records.push_back(it->second);
  }

  const llm::GenerationParams params{plan.temperature, plan.max_tokens, std::nullopt};
  const auto prompt_for = [&](const corpus::QARecord& r, const llm::InstructionList& list) {
    auto task = plan.task;
    task.instance = r.question;
    return llm::render_prompt(task, list);
  };
  std::vector<llm::Request> requests;
  for (const auto* r : records) {
    if (plan.sources.contains(Source::BaseAIGT)) requests.push_back({prompt_for(*r, {}), params, 0});
    if (plan.sources.contains(Source::FailoptAIGT)) {
      requests.push_back({prompt_for(*r, plan.failopt_instructions), params, 0});
    }
  }
  const auto batch = gateway.batch_generate(requests, plan.max_in_flight);

  std::vector<TrainingSample> out;
  const auto emit = [&](const std::string& text, Source src, const std::string& qid) {
    const auto label = src == Source::Human ? detect::Label::Human : detect::Label::AI;
    out.push_back({text, label, Granularity::FullAnswer, src, qid});
    if (!plan.sentence_expand) return;
    for (auto& s : corpus::split_sentences(text)) out.push_back({std::move(s), label, Granularity::Sentence, src, qid});
  };
  std::size_t next = 0;
  for (const auto* r : records) {
    emit(r->human_answer, Source::Human, r->id);
    for (auto src : {Source::BaseAIGT, Source::FailoptAIGT}) {
      if (!plan.sources.contains(src)) continue;
      const auto& gen = batch.outputs[next++];
      if (!gen || llm::is_refusal(*gen)) {
        detail::log().warn("dropping {} sample for question {}: generation refused or failed", to_string(src), r->id);
        continue;
      }
      emit(*gen, src, r->id);
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const TrainingSample& s) {
  j = {{"text", s.text},
       {"label", s.label == detect::Label::AI ? "AI" : "Human"},
       {"granularity", to_string(s.granularity)},
       {"source", to_string(s.source)},
       {"question_id", s.question_id}};
}

void from_json(const nlohmann::json& j, TrainingSample& s) {
  s.text = j.at("text").get<std::string>();
  const auto label = j.at("label").get<std::string>();
  if (label != "AI" && label != "Human") throw Error(Errc::Parse, "unknown label '" + label + "'");
  s.label = label == "AI" ? detect::Label::AI : detect::Label::Human;
  const auto gran = j.at("granularity").get<std::string>();
  if (gran != "FullAnswer" && gran != "Sentence") throw Error(Errc::Parse, "unknown granularity '" + gran + "'");
  s.granularity = gran == "FullAnswer" ? Granularity::FullAnswer : Granularity::Sentence;
  s.source = parse_source(j.at("source").get<std::string>());
  s.question_id = j.at("question_id").get<std::string>();
}

void save_samples_jsonl(std::span<const TrainingSample> samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  for (const auto& s : samples) out << nlohmann::json(s).dump() << '\n';
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

LinearTrainer::LinearTrainer(detect::LinearHyper hyper, std::shared_ptr<const detect::LinearNgramModel> base_model,
                             bool warm_start, bool scale_steps)
    : hyper_(hyper), base_(std::move(base_model)), warm_start_(warm_start), scale_steps_(scale_steps) {
  if (!base_) throw Error(Errc::Config, "LinearTrainer needs a base model");
}

void LinearTrainer::prepare(std::span<const TrainingSample> pool) {
  const std::size_t dim = std::size_t{1} << hyper_.dim_log2;
  features_.clear();
  labels_.clear();
  features_.reserve(pool.size());
  for (const auto& s : pool) {
    features_.push_back(detect::featurize(s.text, hyper_.n_lo, hyper_.n_hi, dim));
    labels_.push_back(s.label == detect::Label::AI ? 1 : 0);
  }
}

std::shared_ptr<const detect::Detector> LinearTrainer::train(std::span<const std::size_t> sample_indices,
                                                             std::uint64_t seed, double data_scale) {
  std::vector<const detect::FeatureVector*> xs;
  std::vector<std::uint8_t> ys;
  xs.reserve(sample_indices.size());
  ys.reserve(sample_indices.size());
  for (auto i : sample_indices) {
    if (i >= features_.size()) throw Error(Errc::OutOfRange, "sample index outside the prepared pool");
    xs.push_back(&features_[i]);
    ys.push_back(labels_[i]);
  }
  auto hyper = hyper_;
  hyper.seed = seed;
  if (scale_steps_) hyper.max_iters = static_cast<int>(std::lround(hyper.max_iters * data_scale));
  auto model = std::make_shared<detect::LinearNgramModel>(
      detect::train_linear_features(xs, ys, hyper, nullptr, warm_start_ ? base_.get() : nullptr));
  return std::make_shared<detect::LinearDetector>(std::move(model), "linear");
}

std::shared_ptr<const detect::Detector> LinearTrainer::untrained() const {
  return std::make_shared<detect::LinearDetector>(base_, "linear");
}

AblationResult run_ablation(const AugmentationPlan& plan, std::span<const TrainingSample> samples,
                            DetectorTrainer& trainer, const EvalSuite& suite) {
  plan.validate();
  if (suite.attacks.empty()) throw Error(Errc::EmptyInput, "the eval suite lists no attacks");

  // Questions with a full answer from every planned source, in plan order.
  std::map<std::string, std::set<Source>> present;
  for (const auto& s : samples) {
    if (s.granularity == Granularity::FullAnswer) present[s.question_id].insert(s.source);
  }
  std::vector<std::string> pool;
  for (const auto& q : plan.questions) {
    if (present[q] == plan.sources) pool.push_back(q);
  }
  std::unordered_map<std::string, std::size_t> pool_pos;
  for (std::size_t i = 0; i < pool.size(); ++i) pool_pos.emplace(pool[i], i);

  trainer.prepare(samples);
  const std::size_t smallest = *std::min_element(plan.size_sweep.begin(), plan.size_sweep.end());
  AblationResult result;
  const auto evaluate = [&](const detect::Detector& det, Arm arm, std::size_t size, std::size_t seed_index) {
    for (const auto& attack : suite.attacks) {
      result.rows.push_back(
          {arm, size, seed_index,
           eval::evaluate_attack(det, suite.records, attack, suite.task, suite.tau_policy, suite.config)});
    }
  };

  for (auto arm : plan.arms) {
    if (arm == Arm::NoTrain) {
      evaluate(*trainer.untrained(), arm, 0, 0);
      continue;
    }
    const auto wanted = arm_sources(arm);
    const bool multi = std::find(plan.multi_seed_arms.begin(), plan.multi_seed_arms.end(), arm) !=
                       plan.multi_seed_arms.end();
    const std::size_t n_seeds = multi ? plan.n_seeds : 1;
    for (auto size : plan.size_sweep) {
      for (std::size_t r = 0; r < n_seeds; ++r) {
        try {
          if (!std::includes(plan.sources.begin(), plan.sources.end(), wanted.begin(), wanted.end())) {
            throw Error(Errc::Config, "the plan does not generate every source of this arm");
          }
          if (size > pool.size()) {
            throw Error(Errc::InsufficientData, "size " + std::to_string(size) + " exceeds the " +
                                                    std::to_string(pool.size()) + " complete questions");
          }
          std::vector<char> chosen(pool.size(), size == pool.size() ? 1 : 0);
          if (size < pool.size()) {
            Rng rng(derive_seed(plan.seed, "ablation|" + std::to_string(size) + "|" + std::to_string(r)));
            for (auto i : rng.sample_indices(pool.size(), size)) chosen[i] = 1;
          }
          std::vector<std::size_t> idx;
          for (std::size_t i = 0; i < samples.size(); ++i) {
            auto it = pool_pos.find(samples[i].question_id);
            if (it != pool_pos.end() && chosen[it->second] && wanted.contains(samples[i].source)) idx.push_back(i);
          }
          const double scale = static_cast<double>(size) / static_cast<double>(smallest);
          const auto det = trainer.train(idx, derive_seed(plan.seed, "train|" + std::to_string(r)), scale);
          evaluate(*det, arm, size, r);
        } catch (const Error& e) {
          detail::log().error("ablation arm {} size {} seed {} failed: {}", to_string(arm), size, r, e.what());
          result.failures.push_back({arm, size, r, e.what()});
        }
      }
    }
  }
  return result;
}

std::string ablation_csv(const AblationResult& result) {
  std::ostringstream out;
  out << "arm,size,seed,detector,attack,task,auroc,asr,mean_human_score\n";
  for (const auto& row : result.rows) {
    const auto& r = row.report;
    const auto hs = r.mean_human_score();
    out << eval::csv_field(std::string(to_string(row.arm))) << ',' << row.size << ',' << row.seed_index << ','
        << eval::csv_field(r.detector_id) << ',' << eval::csv_field(r.attack_name) << ','
        << eval::csv_field(r.task) << ',' << eval::format_number(r.auroc) << ','
        << (r.asr ? eval::format_number(*r.asr) : "") << ',' << (hs ? eval::format_number(*hs) : "") << '\n';
  }
  return out.str();
}

std::vector<TrajectoryPoint> human_score_trajectory(const AblationResult& result) {
  std::map<std::tuple<int, std::string, std::size_t>, std::vector<double>> groups;
  std::vector<std::tuple<int, std::string, std::size_t>> order;
  for (const auto& row : result.rows) {
    if (row.arm == Arm::NoTrain) continue;
    const auto hs = row.report.mean_human_score();
    if (!hs) continue;
    const auto key = std::tuple{static_cast<int>(row.arm), row.report.attack_name, row.size};
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.push_back(*hs);
  }
  std::vector<TrajectoryPoint> points;
  for (const auto& key : order) {
    const auto& [arm, attack, size] = key;
    const auto& v = groups.at(key);
    points.push_back({static_cast<Arm>(arm), attack, size, v.size(), median(v), 1.0});
  }
  for (auto& p : points) {
    std::size_t smallest = p.size;
    double base = p.median_human_score;
    for (const auto& q : points) {
      if (q.arm == p.arm && q.attack == p.attack && q.size < smallest) {
        smallest = q.size;
        base = q.median_human_score;
      }
    }
    p.ratio = base > 0.0 ? p.median_human_score / base : 1.0;
  }
  return points;
}

std::string trajectory_csv(std::span<const TrajectoryPoint> points) {
  std::ostringstream out;
  out << "arm,attack,size,n_seeds,median_human_score,ratio_to_smallest\n";
  for (const auto& p : points) {
    out << eval::csv_field(std::string(to_string(p.arm))) << ',' << eval::csv_field(p.attack) << ',' << p.size
        << ',' << p.n_seeds << ',' << eval::format_number(p.median_human_score) << ','
        << eval::format_number(p.ratio) << '\n';
  }
  return out.str();
}

}  // namespace failopt::augment
