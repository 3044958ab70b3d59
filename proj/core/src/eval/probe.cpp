#include "failopt/eval/probe.hpp"

#include <algorithm>
#include <cctype>

#include "failopt/error.hpp"
#include "failopt/llm/prompt.hpp"
#include "failopt/llm/refusal.hpp"
#include "failopt/rng.hpp"

namespace failopt::eval {

std::string_view to_string(Criterion c) noexcept {
  switch (c) {
    case Criterion::Diversity: return "diversity";
    case Criterion::Subjectivity: return "subjectivity";
    case Criterion::Casualness: return "casualness";
    case Criterion::Emotionality: return "emotionality";
  }
  return "diversity";
}

Criterion parse_criterion(std::string_view name) {
  for (auto c : {Criterion::Diversity, Criterion::Subjectivity, Criterion::Casualness, Criterion::Emotionality}) {
    if (to_string(c) == name) return c;
  }
  throw Error(Errc::Config, "unknown criterion '" + std::string(name) + "'");
}

int parse_judge_pick(std::string_view completion) {
  std::string first(completion.substr(0, completion.find('\n')));
  for (auto& ch : first) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  const bool one = first.find("answer 1") != std::string::npos;
  const bool two = first.find("answer 2") != std::string::npos;
  if (one == two) throw Error(Errc::JudgeParse, "judge reply names no single answer: '" + first + "'");
  return one ? 1 : 2;
}

ProbeResult probe_shortcuts(llm::Gateway& generator, llm::Gateway& judge, std::span<const std::string> questions,
                            const std::string& task, Criterion criterion, const std::string& criterion_text,
                            const ProbeConfig& cfg) {
  if (questions.empty()) throw Error(Errc::InsufficientData, "probe needs at least one question");
  ProbeResult result;
  result.task = task;
  result.criterion = criterion;

  std::vector<llm::Request> requests;
  for (const auto& q : questions) {
    corpus::TaskSpec spec{cfg.base_template, "", q, 300};
    requests.push_back({llm::render_prompt(spec, llm::InstructionList{}), cfg.generation, 0});
    requests.push_back({llm::render_revision(criterion_text, q), cfg.generation, 0});
  }
  const auto answers = generator.batch_generate(requests, cfg.max_in_flight);

  struct Pending {
    std::string prompt;
    int revised_position;  // 1 or 2
  };
  std::vector<Pending> pending;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const auto& base = answers.outputs[2 * i];
    const auto& revised = answers.outputs[2 * i + 1];
    if (!base || !revised || llm::is_refusal(*base) || llm::is_refusal(*revised)) {
      ++result.dropped_refusals;
      continue;
    }
    Rng coin(derive_seed(cfg.seed, "probe-order|" + std::to_string(i)));
    const bool revised_first = coin.bernoulli(0.5);
    pending.push_back({revised_first ? llm::render_judge(criterion_text, *revised, *base)
                                     : llm::render_judge(criterion_text, *base, *revised),
                       revised_first ? 1 : 2});
  }

  for (const auto& p : pending) {
    std::optional<int> pick;
    for (int attempt = 0; attempt < 2 && !pick; ++attempt) {
      try {
        pick = parse_judge_pick(judge.generate(p.prompt, cfg.judge, attempt, attempt == 0));
      } catch (const Error& e) {
        if (e.code() != Errc::JudgeParse) throw;
      }
    }
    if (!pick) {
      ++result.dropped_unparsed;
      continue;
    }
    ++result.total;
    if (*pick == p.revised_position) ++result.wins_revised;
  }
  if (result.total == 0) throw Error(Errc::InsufficientData, "no probe item was judged");
  result.win_ratio = static_cast<double>(result.wins_revised) / static_cast<double>(result.total);
  return result;
}

}  // namespace failopt::eval
