#include "failopt/opt/failopt.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "../log.hpp"
#include "failopt/error.hpp"
#include "failopt/llm/refusal.hpp"
#include "failopt/rng.hpp"

namespace failopt::opt {
namespace {

constexpr int kCheckpointVersion = 1;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool mentions_group(std::string_view s) {
  return s.find("G1") != std::string_view::npos || s.find("G2") != std::string_view::npos;
}

// First usable line of a paraphrase reply, without list marker or quotes.
std::string clean_paraphrase(std::string_view reply) {
  std::string_view line;
  while (!reply.empty()) {
    const auto nl = reply.find('\n');
    line = trim(reply.substr(0, nl));
    if (!line.empty()) break;
    reply.remove_prefix(nl == std::string_view::npos ? reply.size() : nl + 1);
  }
  if (const auto items = llm::parse_numbered_list(line); !items.empty()) line = trim(items.front());
  if (line.starts_with("Output:")) line = trim(line.substr(7));
  if (line.size() >= 2 && line.front() == '"' && line.back() == '"') line = trim(line.substr(1, line.size() - 2));
  return std::string(line);
}

corpus::TaskSpec task_for(const FailoptConfig& cfg, const corpus::QARecord& r) {
  return corpus::TaskSpec{cfg.task, cfg.task_description, r.question, cfg.min_words};
}

llm::GenerationParams params_at(const FailoptConfig& cfg, double temperature) {
  return llm::GenerationParams{temperature, cfg.max_tokens, std::nullopt};
}

nlohmann::json candidate_json(const Candidate& c) {
  return {{"id", c.id},
          {"list", c.list.items()},
          {"rate", c.detection_rate ? nlohmann::json(*c.detection_rate) : nlohmann::json()},
          {"parent", c.parent ? nlohmann::json(*c.parent) : nlohmann::json()},
          {"lineage", to_string(c.lineage)},
          {"n_generated", c.n_generated},
          {"n_failed", c.n_failed},
          {"disqualified", c.disqualified}};
}

Candidate candidate_from_json(const nlohmann::json& j) {
  Candidate c;
  c.id = j.at("id").get<std::size_t>();
  c.list = llm::InstructionList(j.at("list").get<std::vector<std::string>>());
  if (!j.at("rate").is_null()) c.detection_rate = j.at("rate").get<double>();
  if (!j.at("parent").is_null()) c.parent = j.at("parent").get<std::size_t>();
  const auto lineage = j.at("lineage").get<std::string>();
  c.lineage = lineage == "NewInstruction" ? MutationKind::NewInstruction
              : lineage == "Paraphrase"   ? MutationKind::Paraphrase
                                          : MutationKind::Root;
  c.n_generated = j.at("n_generated").get<std::size_t>();
  c.n_failed = j.at("n_failed").get<std::size_t>();
  c.disqualified = j.at("disqualified").get<bool>();
  return c;
}

// Rates already measured in this run, keyed by list and record ids.
class RateMemo {
 public:
  struct Entry {
    std::optional<double> rate;
    std::size_t n_generated = 0;
    std::size_t n_failed = 0;
    bool disqualified = false;
  };

  static std::string key(const llm::InstructionList& list, std::span<const corpus::QARecord> records) {
    std::string k;
    for (const auto& s : list.items()) k += s + '\x1f';
    k += '\x1e';
    for (const auto& r : records) k += r.id + '\x1f';
    return k;
  }

  std::optional<Entry> find(const std::string& k) const {
    auto it = entries_.find(k);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }
  void put(std::string k, Entry e) { entries_.emplace(std::move(k), e); }

 private:
  std::map<std::string, Entry> entries_;
};

thread_local RateMemo* t_memo = nullptr;

std::vector<std::size_t> sorted_sample(Rng& rng, std::size_t n, std::size_t k) {
  return rng.sample_indices(n, k);
}

std::vector<corpus::QARecord> pick(const corpus::DatasetSplit& split, std::span<const std::size_t> idx) {
  std::vector<corpus::QARecord> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(split.records[i]);
  return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

class RunStore {
 public:
  explicit RunStore(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
    if (dir_) std::filesystem::create_directories(*dir_);
  }

  bool enabled() const { return dir_.has_value(); }
  std::filesystem::path path(const char* name) const { return *dir_ / name; }

  void write_config(const FailoptConfig& cfg) const {
    if (enabled()) write_json(path("failopt_config.json"), cfg);
  }

  /// Drops step lines past `completed_step` left by an interrupted run.
  void truncate_steps(std::size_t completed_step) const {
    if (!enabled() || !std::filesystem::exists(path("steps.jsonl"))) return;
    std::ifstream in(path("steps.jsonl"));
    std::vector<std::string> kept;
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      if (nlohmann::json::parse(line).at("step").get<std::size_t>() <= completed_step) kept.push_back(line);
    }
    in.close();
    std::ofstream out(path("steps.jsonl"), std::ios::trunc);
    for (const auto& l : kept) out << l << '\n';
  }

  void append(const nlohmann::json& line) const {
    if (!enabled()) return;
    std::ofstream out(path("steps.jsonl"), std::ios::app);
    out << line.dump() << '\n';
    if (!out) throw Error(Errc::Io, "cannot append to steps.jsonl");
  }

  void checkpoint(const nlohmann::json& state) const {
    if (enabled()) write_json(path("checkpoint.json"), state);
  }

 private:
  std::optional<std::filesystem::path> dir_;
};

}  // namespace

std::string_view to_string(MutationKind kind) noexcept {
  switch (kind) {
    case MutationKind::Root: return "Root";
    case MutationKind::NewInstruction: return "NewInstruction";
    case MutationKind::Paraphrase: return "Paraphrase";
  }
  return "Root";
}

void FailoptConfig::validate() const {
  if (n_feed < 1) throw Error(Errc::Config, "n_feed must be at least 1");
  if (batch_tr < 1) throw Error(Errc::Config, "batch_tr must be at least 1");
  if (batch_val < 1) throw Error(Errc::Config, "batch_val must be at least 1");
  if (k < 1) throw Error(Errc::Config, "k must be at least 1");
  if (max_tokens < 1) throw Error(Errc::Config, "max_tokens must be positive");
  if (max_in_flight < 1) throw Error(Errc::Config, "max_in_flight must be at least 1");
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0)) {
    throw Error(Errc::Config, "max_failure_fraction must lie in [0, 1]");
  }
  for (double t : {temps.feedback, temps.convert, temps.generate, temps.paraphrase}) {
    if (t < 0.0) throw Error(Errc::Config, "temperatures must be non-negative");
  }
}

void to_json(nlohmann::json& j, const FailoptConfig& c) {
  j = {{"n_feed", c.n_feed},
       {"batch_tr", c.batch_tr},
       {"batch_val", c.batch_val},
       {"n_para", c.n_para},
       {"k", c.k},
       {"step_max", c.step_max},
       {"tau_policy", c.tau_policy ? nlohmann::json(*c.tau_policy) : nlohmann::json("auto")},
       {"temps",
        {{"feedback", c.temps.feedback},
         {"convert", c.temps.convert},
         {"generate", c.temps.generate},
         {"paraphrase", c.temps.paraphrase}}},
       {"max_tokens", c.max_tokens},
       {"seed", c.seed},
       {"task", c.task == corpus::TaskTemplate::Eli5           ? "Eli5"
                : c.task == corpus::TaskTemplate::Continuation ? "Continuation"
                                                               : "Custom"},
       {"task_description", c.task_description},
       {"min_words", c.min_words},
       {"order", c.order == RankOrder::LowestRate ? "LowestRate" : "HighestRate"},
       {"frozen_batches", c.frozen_batches},
       {"keep_previous_beam", c.keep_previous_beam},
       {"max_failure_fraction", c.max_failure_fraction},
       {"max_in_flight", c.max_in_flight}};
}

void from_json(const nlohmann::json& j, FailoptConfig& c) {
  c = FailoptConfig{};
  c.n_feed = j.value("n_feed", c.n_feed);
  c.batch_tr = j.value("batch_tr", c.batch_tr);
  c.batch_val = j.value("batch_val", c.batch_val);
  c.n_para = j.value("n_para", c.n_para);
  c.k = j.value("k", c.k);
  c.step_max = j.value("step_max", c.step_max);
  if (j.contains("tau_policy") && !(j.at("tau_policy").is_string() && j.at("tau_policy") == "auto")) {
    c.tau_policy = j.at("tau_policy").get<eval::TauPolicy>();
  }
  if (j.contains("temps")) {
    const auto& t = j.at("temps");
    c.temps.feedback = t.value("feedback", c.temps.feedback);
    c.temps.convert = t.value("convert", c.temps.convert);
    c.temps.generate = t.value("generate", c.temps.generate);
    c.temps.paraphrase = t.value("paraphrase", c.temps.paraphrase);
  }
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.seed = j.value("seed", c.seed);
  const auto task = j.value("task", std::string("Eli5"));
  if (task == "Eli5") c.task = corpus::TaskTemplate::Eli5;
  else if (task == "Continuation") c.task = corpus::TaskTemplate::Continuation;
  else if (task == "Custom") c.task = corpus::TaskTemplate::Custom;
  else throw Error(Errc::Config, "unknown task template '" + task + "'");
  c.task_description = j.value("task_description", c.task_description);
  c.min_words = j.value("min_words", c.min_words);
  const auto order = j.value("order", std::string("LowestRate"));
  if (order == "LowestRate") c.order = RankOrder::LowestRate;
  else if (order == "HighestRate") c.order = RankOrder::HighestRate;
  else throw Error(Errc::Config, "unknown rank order '" + order + "'");
  c.frozen_batches = j.value("frozen_batches", c.frozen_batches);
  c.keep_previous_beam = j.value("keep_previous_beam", c.keep_previous_beam);
  c.max_failure_fraction = j.value("max_failure_fraction", c.max_failure_fraction);
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
}

double detection_rate(std::span<const double> ai_scores, double tau) {
  if (ai_scores.empty()) throw Error(Errc::EmptyBatch, "detection rate of an empty batch");
  const auto hits = std::count_if(ai_scores.begin(), ai_scores.end(), [&](double s) { return s >= tau; });
  return static_cast<double>(hits) / static_cast<double>(ai_scores.size());
}

FeedbackList generate_feedback(llm::Gateway& gateway, std::span<const std::string> human_texts,
                               std::span<const std::string> ai_texts, std::size_t n_feed,
                               const llm::GenerationParams& params) {
  if (human_texts.empty() || human_texts.size() != ai_texts.size()) {
    throw Error(Errc::LengthMismatch, "feedback needs equal, non-zero numbers of human and AI texts");
  }
  const auto prompt = llm::render_disc(human_texts, ai_texts, n_feed);
  std::vector<std::string> items;
  for (int attempt = 0; attempt < 2; ++attempt) {
    items = llm::parse_numbered_list(gateway.generate(prompt, params, attempt, attempt == 0));
    if (items.size() >= n_feed) {
      items.resize(n_feed);
      return FeedbackList{std::move(items)};
    }
  }
  throw Error(Errc::ParseShortfall, "feedback reply parsed into " + std::to_string(items.size()) +
                                        " items, expected " + std::to_string(n_feed));
}

std::vector<std::string> feedback_to_instructions(llm::Gateway& gateway, const FeedbackList& feedback,
                                                  const llm::GenerationParams& params) {
  const auto prompt = llm::render_ins(feedback.items);
  std::vector<std::string> items;
  for (int attempt = 0; attempt < 2; ++attempt) {
    items = llm::parse_numbered_list(gateway.generate(prompt, params, attempt, attempt == 0));
    if (items.size() >= feedback.items.size()) break;
  }
  if (items.size() < feedback.items.size()) {
    throw Error(Errc::ParseShortfall, "conversion reply parsed into " + std::to_string(items.size()) +
                                          " instructions, expected " + std::to_string(feedback.items.size()));
  }
  items.resize(feedback.items.size());
  std::vector<std::string> out;
  for (auto& s : items) {
    if (mentions_group(s)) {
      detail::log().warn("dropping instruction that mentions G1/G2: {}", s);
      continue;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Candidate> expand_candidates(std::span<const Candidate> beam,
                                         std::span<const std::vector<std::string>> new_instructions,
                                         std::size_t& next_id) {
  if (beam.empty()) throw Error(Errc::EmptyInput, "expand_candidates needs a non-empty beam");
  if (new_instructions.size() != beam.size()) {
    throw Error(Errc::LengthMismatch, "one instruction list per beam element is required");
  }
  std::vector<Candidate> out;
  for (std::size_t b = 0; b < beam.size(); ++b) {
    std::set<std::string> seen;
    for (const auto& s : new_instructions[b]) {
      if (s.empty() || s.find('\n') != std::string::npos) continue;
      if (beam[b].list.contains(s) || !seen.insert(s).second) continue;
      Candidate c;
      c.id = next_id++;
      c.list = beam[b].list.prepended(s);
      c.parent = beam[b].id;
      c.lineage = MutationKind::NewInstruction;
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<Candidate> select_top_k(std::span<const Candidate> candidates, std::size_t k, RankOrder order) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].detection_rate && !candidates[i].disqualified) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& ca = candidates[a];
    const auto& cb = candidates[b];
    const double ra = *ca.detection_rate, rb = *cb.detection_rate;
    if (ra != rb) return order == RankOrder::LowestRate ? ra < rb : ra > rb;
    if (ca.list.size() != cb.list.size()) return ca.list.size() < cb.list.size();
    if (!ca.list.empty() && !cb.list.empty() && ca.list.newest() != cb.list.newest()) {
      return ca.list.newest() < cb.list.newest();
    }
    return false;
  });
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < idx.size() && out.size() < k; ++i) out.push_back(candidates[idx[i]]);
  return out;
}

void measure(const EvalContext& ctx, std::span<Candidate> candidates, std::span<const corpus::QARecord> records) {
  if (records.empty()) throw Error(Errc::EmptyBatch, "cannot measure candidates on an empty batch");
  const auto& cfg = *ctx.cfg;
  const auto params = params_at(cfg, cfg.temps.generate);

  std::vector<std::size_t> todo;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (t_memo) {
      if (auto hit = t_memo->find(RateMemo::key(candidates[c].list, records))) {
        candidates[c].detection_rate = hit->rate;
        candidates[c].n_generated = hit->n_generated;
        candidates[c].n_failed = hit->n_failed;
        candidates[c].disqualified = hit->disqualified;
        continue;
      }
    }
    todo.push_back(c);
  }
  if (todo.empty()) return;

  std::vector<llm::Request> requests;
  requests.reserve(todo.size() * records.size());
  for (auto c : todo) {
    for (const auto& r : records) {
      requests.push_back({llm::render_prompt(task_for(cfg, r), candidates[c].list), params, 0});
    }
  }
  const auto batch = ctx.gateway->batch_generate(requests, cfg.max_in_flight);

  std::vector<std::string> texts;
  std::vector<std::size_t> owner;
  std::vector<std::size_t> failed(todo.size(), 0);
  for (std::size_t t = 0; t < todo.size(); ++t) {
    for (std::size_t j = 0; j < records.size(); ++j) {
      const auto& out = batch.outputs[t * records.size() + j];
      if (!out || llm::is_refusal(*out)) {
        ++failed[t];
        continue;
      }
      texts.push_back(*out);
      owner.push_back(t);
    }
  }
  const auto scores = ctx.target.detector->score_batch(texts);
  std::vector<std::vector<double>> per(todo.size());
  for (std::size_t i = 0; i < scores.size(); ++i) per[owner[i]].push_back(scores[i].ai_score);

  for (std::size_t t = 0; t < todo.size(); ++t) {
    auto& c = candidates[todo[t]];
    c.n_failed = failed[t];
    c.n_generated = per[t].size();
    const double fail_frac = static_cast<double>(failed[t]) / static_cast<double>(records.size());
    c.disqualified = fail_frac > cfg.max_failure_fraction || per[t].empty();
    c.detection_rate = per[t].empty() ? std::nullopt : std::optional(detection_rate(per[t], ctx.target.tau));
    if (c.disqualified) {
      detail::log().warn("candidate {} disqualified: {} of {} generations failed", c.id, failed[t], records.size());
    }
    if (t_memo) {
      t_memo->put(RateMemo::key(c.list, records), {c.detection_rate, c.n_generated, c.n_failed, c.disqualified});
    }
  }
}

std::vector<Candidate> get_top_k(const EvalContext& ctx, std::vector<Candidate> candidates,
                                 std::span<const corpus::QARecord> batch_val, std::size_t k) {
  if (candidates.empty()) throw Error(Errc::EmptyInput, "get_top_k needs candidates");
  if (batch_val.empty()) throw Error(Errc::EmptyBatch, "get_top_k needs a validation batch");
  measure(ctx, candidates, batch_val);
  return select_top_k(candidates, k, ctx.cfg->order);
}

std::vector<Candidate> paraphrase_mutation(llm::Gateway& gateway, std::span<const Candidate> top_k,
                                           std::size_t n_para, const llm::GenerationParams& params,
                                           std::size_t& next_id) {
  std::vector<Candidate> pool(top_k.begin(), top_k.end());
  std::set<llm::InstructionList> lists;
  for (const auto& c : pool) lists.insert(c.list);
  for (const auto& c : top_k) {
    if (c.list.empty()) continue;
    const auto prompt = llm::render_mc(c.list.newest());
    for (std::size_t p = 0; p < n_para; ++p) {
      std::string variant;
      try {
        variant = clean_paraphrase(gateway.generate(prompt, params, static_cast<int>(p)));
      } catch (const Error& e) {
        if (category(e.code()) != ErrorCategory::Backend) throw;
        detail::log().warn("paraphrase of '{}' failed: {}", c.list.newest(), e.what());
        continue;
      }
      if (variant.empty() || variant == c.list.newest() || c.list.contains(variant) || mentions_group(variant)) {
        continue;
      }
      Candidate m;
      m.id = next_id++;
      m.list = c.list.with_newest_replaced(variant);
      m.parent = c.id;
      m.lineage = MutationKind::Paraphrase;
      if (!lists.insert(m.list).second) {
        --next_id;
        continue;
      }
      pool.push_back(std::move(m));
    }
  }
  return pool;
}

FailoptResult run_failopt(const FailoptConfig& cfg, const corpus::DatasetSplit& d_tr,
                          const corpus::DatasetSplit& d_val, llm::Gateway& gateway,
                          const detect::Detector& detector, const RunOptions& options) {
  cfg.validate();
  corpus::require_disjoint(d_tr, d_val);
  if (d_tr.records.size() < cfg.batch_tr) {
    throw Error(Errc::DegenerateData, "training split is smaller than batch_tr");
  }
  if (d_val.records.size() < cfg.batch_val) {
    throw Error(Errc::DegenerateData, "validation split is smaller than batch_val");
  }
  if (options.resume && !options.run_dir) throw Error(Errc::Config, "resume needs a run directory");

  RunStore store(options.run_dir);
  RateMemo memo;
  t_memo = &memo;
  struct MemoReset {
    ~MemoReset() { t_memo = nullptr; }
  } memo_reset;

  const auto policy = cfg.tau_policy.value_or(eval::TauPolicy::default_for(detector));
  FailoptResult result;
  Rng rng(derive_seed(cfg.seed, "failopt-batches"));
  std::size_t next_id = 1;
  std::size_t start_step = 1;
  std::vector<Candidate> beam;
  std::vector<Candidate> ever;  // every list that entered a beam, first occurrence
  std::vector<std::size_t> frozen_tr, frozen_val;

  const auto remember = [&](const std::vector<Candidate>& b) {
    for (const auto& c : b) {
      if (std::none_of(ever.begin(), ever.end(), [&](const Candidate& e) { return e.list == c.list; })) {
        ever.push_back(c);
      }
    }
  };
  const auto checkpoint = [&](std::size_t completed) {
    nlohmann::json beam_j = nlohmann::json::array(), ever_j = nlohmann::json::array();
    for (const auto& c : beam) beam_j.push_back(candidate_json(c));
    for (const auto& c : ever) ever_j.push_back(candidate_json(c));
    store.checkpoint({{"version", kCheckpointVersion},
                      {"completed_step", completed},
                      {"next_id", next_id},
                      {"rng_state", rng.save_state()},
                      {"tau", eval::threshold_to_json(result.tau)},
                      {"baseline_rate", result.baseline_rate},
                      {"beam", beam_j},
                      {"ever", ever_j},
                      {"frozen_tr", frozen_tr},
                      {"frozen_val", frozen_val},
                      {"config", cfg}});
  };

  EvalContext ctx{&gateway, Target{&detector, 0.5}, &cfg};
  if (options.resume) {
    std::ifstream in(store.path("checkpoint.json"));
    if (!in) throw Error(Errc::Io, "no checkpoint in " + options.run_dir->string());
    const auto j = nlohmann::json::parse(in);
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw Error(Errc::VersionMismatch, "checkpoint version differs from this build");
    }
    if (j.at("config") != nlohmann::json(cfg)) {
      throw Error(Errc::Config, "checkpoint was written with a different FAILOpt config");
    }
    start_step = j.at("completed_step").get<std::size_t>() + 1;
    next_id = j.at("next_id").get<std::size_t>();
    rng.load_state(j.at("rng_state").get<std::string>());
    result.tau = eval::threshold_from_json(j.at("tau"));
    result.baseline_rate = j.at("baseline_rate").get<double>();
    for (const auto& c : j.at("beam")) beam.push_back(candidate_from_json(c));
    for (const auto& c : j.at("ever")) ever.push_back(candidate_from_json(c));
    frozen_tr = j.at("frozen_tr").get<std::vector<std::size_t>>();
    frozen_val = j.at("frozen_val").get<std::vector<std::size_t>>();
    store.truncate_steps(start_step - 1);
    ctx.target.tau = result.tau;
    detail::log().info("resuming FAILOpt at step {}", start_step);
  } else {
    store.write_config(cfg);
    store.truncate_steps(0);
    if (policy.kind == eval::TauPolicy::Kind::Fixed) {
      result.tau = policy.tau;
    } else {
      // Calibrate on human answers vs base-prompt generations over the full validation split.
      std::vector<llm::Request> requests;
      for (const auto& r : d_val.records) {
        requests.push_back({llm::render_prompt(task_for(cfg, r), {}), params_at(cfg, cfg.temps.generate), 0});
      }
      const auto gens = gateway.batch_generate(requests, cfg.max_in_flight).values();
      std::vector<std::string> texts;
      for (const auto& r : d_val.records) texts.push_back(r.human_answer);
      texts.insert(texts.end(), gens.begin(), gens.end());
      std::vector<double> scores;
      for (const auto& s : detector.score_batch(texts)) scores.push_back(s.ai_score);
      std::vector<detect::Label> labels(d_val.records.size(), detect::Label::Human);
      labels.resize(texts.size(), detect::Label::AI);
      result.tau = eval::best_f1_threshold(scores, labels).threshold.tau;
    }
    ctx.target.tau = result.tau;
    Candidate root;
    root.id = 0;
    beam = {root};
    measure(ctx, beam, d_val.records);
    result.baseline_rate = beam.front().detection_rate.value_or(1.0);
    remember(beam);
    if (cfg.frozen_batches) {
      frozen_tr = sorted_sample(rng, d_tr.records.size(), cfg.batch_tr);
      frozen_val = sorted_sample(rng, d_val.records.size(), cfg.batch_val);
    }
    store.append({{"type", "baseline"}, {"step", 0}, {"candidate", candidate_json(beam.front())},
                  {"tau", eval::threshold_to_json(result.tau)}});
    checkpoint(0);
  }

  const auto gen_params = params_at(cfg, cfg.temps.generate);
  for (std::size_t step = start_step; step <= cfg.step_max; ++step) {
    const auto tr_idx = cfg.frozen_batches ? frozen_tr : sorted_sample(rng, d_tr.records.size(), cfg.batch_tr);
    const auto val_idx = cfg.frozen_batches ? frozen_val : sorted_sample(rng, d_val.records.size(), cfg.batch_val);
    const auto b_tr = pick(d_tr, tr_idx);
    const auto b_val = pick(d_val, val_idx);
    std::vector<Candidate> evaluated;

    std::vector<Candidate> inter;
    for (const auto& current : beam) {
      std::vector<std::string> prompts, human;
      for (const auto& r : b_tr) {
        prompts.push_back(llm::render_prompt(task_for(cfg, r), current.list));
        human.push_back(r.human_answer);
      }
      const auto ai = gateway.batch_generate(prompts, gen_params, cfg.max_in_flight).values();
      const auto feedback = generate_feedback(gateway, human, ai, cfg.n_feed, params_at(cfg, cfg.temps.feedback));
      const std::vector<std::vector<std::string>> instructions = {
          feedback_to_instructions(gateway, feedback, params_at(cfg, cfg.temps.convert))};
      auto cands = expand_candidates(std::span(&current, 1), instructions, next_id);
      if (cands.empty()) continue;
      measure(ctx, cands, b_val);
      evaluated.insert(evaluated.end(), cands.begin(), cands.end());
      for (auto& c : select_top_k(cands, cfg.k, cfg.order)) inter.push_back(std::move(c));
    }

    auto pool = paraphrase_mutation(gateway, inter, cfg.n_para, params_at(cfg, cfg.temps.paraphrase), next_id);
    if (cfg.keep_previous_beam) {
      for (const auto& c : beam) {
        if (std::none_of(pool.begin(), pool.end(), [&](const Candidate& p) { return p.list == c.list; })) {
          pool.push_back(c);
        }
      }
    }
    std::vector<Candidate> next_beam;
    if (!pool.empty()) {
      measure(ctx, pool, b_val);
      for (const auto& c : pool) {
        if (c.lineage == MutationKind::Paraphrase) evaluated.push_back(c);
      }
      next_beam = select_top_k(pool, cfg.k, cfg.order);
    }
    if (next_beam.empty()) {
      detail::log().warn("step {} produced no qualified candidate; keeping the previous beam", step);
      next_beam = beam;
    }
    beam = std::move(next_beam);
    remember(beam);

    for (const auto& c : evaluated) {
      store.append({{"type", "candidate"}, {"step", step}, {"candidate", candidate_json(c)}});
    }
    nlohmann::json beam_j = nlohmann::json::array();
    for (const auto& c : beam) beam_j.push_back(candidate_json(c));
    store.append({{"type", "beam"}, {"step", step}, {"val_ids", val_idx}, {"beam", beam_j}});
    result.steps.push_back({step, beam, evaluated.size()});
    detail::log().info("step {}: best rate {:.4f} with {} instruction(s)", step,
                       beam.front().detection_rate.value_or(1.0), beam.front().list.size());
    checkpoint(step);
  }

  // Final choice: re-measure every list that entered a beam on the full validation split.
  for (auto& c : ever) {
    c.detection_rate.reset();
    c.disqualified = false;
  }
  measure(ctx, ever, d_val.records);
  result.finalists = ever;
  const auto best = select_top_k(ever, 1, cfg.order);
  if (best.empty()) throw Error(Errc::InsufficientData, "no instruction list qualified on the validation split");
  result.final_list = best.front().list;
  result.final_rate = *best.front().detection_rate;
  for (const auto& c : ever) {
    if (c.list.empty() && c.detection_rate) result.baseline_rate = *c.detection_rate;
  }
  if (store.enabled()) {
    save_final_list(result, store.path("final_list.json"));
  }
  return result;
}

void save_final_list(const FailoptResult& result, const std::filesystem::path& path) {
  nlohmann::json finalists = nlohmann::json::array();
  for (const auto& c : result.finalists) finalists.push_back(candidate_json(c));
  write_json(path, {{"instructions", result.final_list.items()},
                    {"final_rate", result.final_rate},
                    {"baseline_rate", result.baseline_rate},
                    {"tau", eval::threshold_to_json(result.tau)},
                    {"finalists", finalists}});
}

llm::InstructionList load_final_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  try {
    return llm::InstructionList(nlohmann::json::parse(in).at("instructions").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, "malformed instruction list " + path.string() + ": " + e.what());
  }
}

}  // namespace failopt::opt
