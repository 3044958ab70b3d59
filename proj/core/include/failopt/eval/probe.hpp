#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "failopt/corpus/types.hpp"
#include "failopt/llm/gateway.hpp"

namespace failopt::eval {

enum class Criterion { Diversity, Subjectivity, Casualness, Emotionality };

std::string_view to_string(Criterion c) noexcept;
Criterion parse_criterion(std::string_view name);

struct ProbeConfig {
  corpus::TaskTemplate base_template = corpus::TaskTemplate::Eli5;
  llm::GenerationParams generation{1.0, 600, std::nullopt};
  llm::GenerationParams judge{0.0, 50, std::nullopt};
  std::uint64_t seed = 17;
  std::size_t max_in_flight = 4;
};

struct ProbeResult {
  std::string task;
  Criterion criterion = Criterion::Diversity;
  std::size_t wins_revised = 0;
  std::size_t total = 0;
  double win_ratio = 0.0;
  std::size_t dropped_refusals = 0;
  std::size_t dropped_unparsed = 0;
};

/// 1 or 2 when the first line names exactly one of "Answer 1" / "Answer 2"
/// (case-insensitive); throws JudgeParse otherwise.
int parse_judge_pick(std::string_view completion);

/// Per question: a base answer, a revision steered by `criterion_text`, and a
/// judge comparison in seeded random order. Refused questions and judge
/// replies that fail to parse twice are dropped and counted. Throws
/// InsufficientData when nothing is judged.
ProbeResult probe_shortcuts(llm::Gateway& generator, llm::Gateway& judge,
                            std::span<const std::string> questions, const std::string& task,
                            Criterion criterion, const std::string& criterion_text,
                            const ProbeConfig& cfg = {});

}  // namespace failopt::eval
