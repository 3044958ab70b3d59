#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "failopt/llm/backend.hpp"

namespace failopt::llm {

/// A planted prompt-specific feature and the instruction that removes it.
struct MarkerSpec {
  std::string token;
  double insert_rate = 1.0;
  std::string suppression_instruction;
  std::vector<std::string> paraphrases;
  /// Emitted whenever the suppression instruction is followed; empty for none.
  std::string trace_token;
};

/// A feedback item with no effect on generations.
struct DistractorSpec {
  std::string feedback;
  std::string instruction;
  std::vector<std::string> paraphrases;
};

struct MockScenario {
  std::string id;
  std::uint64_t seed = 17;
  std::vector<std::string> vocabulary;
  std::pair<int, int> human_length_range{270, 420};
  std::pair<int, int> sentence_length{8, 20};
  int anchor_window = 200;  // planted tokens land within the first this-many tokens
  std::vector<MarkerSpec> markers;
  std::map<std::string, std::string> feedback_phrasings;  // marker token -> feedback
  std::vector<DistractorSpec> distractors;
  std::map<std::string, std::string> base_texts;  // instance key -> scripted answer
  std::vector<std::string> refusals;              // instance keys that get refused

  /// Throws Config when an invariant is broken.
  void validate() const;
};

void to_json(nlohmann::json& j, const MockScenario& s);
void from_json(const nlohmann::json& j, MockScenario& s);
MockScenario load_scenario(const std::filesystem::path& path);

/// Marker indices whose suppression instruction (or a registered paraphrase)
/// appears among `instruction_lines`.
std::vector<std::size_t> suppressed_markers(const MockScenario& s,
                                            std::span<const std::string> instruction_lines);

/// Human-style answer to a question: seeded vocabulary draws, no planted tokens.
std::string mock_human_answer(const MockScenario& s, std::string_view question);

/// The model's answer to `instance` under the given instruction lines.
std::string mock_answer(const MockScenario& s, std::string_view instance, int sample_index,
                        std::span<const std::string> instruction_lines);

/// A short question for synthetic record `index`.
std::string mock_question(const MockScenario& s, std::size_t index);

/// Deterministic scripted completion. Throws UnrecognizedPrompt when no rule
/// matches the prompt.
std::string mock_llm(const MockScenario& s, const std::string& prompt,
                     const GenerationParams& params, int sample_index);

class MockBackend final : public ChatBackend {
 public:
  explicit MockBackend(MockScenario scenario);

  std::string id() const override { return "mock:" + scenario_.id; }
  std::string complete(const std::string& prompt, const GenerationParams& params,
                       int sample_index) const override;
  const MockScenario& scenario() const noexcept { return scenario_; }

 private:
  MockScenario scenario_;
};

}  // namespace failopt::llm
