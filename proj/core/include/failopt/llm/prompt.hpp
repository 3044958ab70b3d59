#pragma once

#include <compare>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "failopt/corpus/types.hpp"

namespace failopt::llm {

/// Ordered adversarial sub-task instructions, newest first. Entries are
/// non-empty single lines and unique; the empty list is the no-attack prompt.
class InstructionList {
 public:
  InstructionList() = default;
  explicit InstructionList(std::vector<std::string> instructions);

  const std::vector<std::string>& items() const noexcept { return items_; }
  bool empty() const noexcept { return items_.empty(); }
  std::size_t size() const noexcept { return items_.size(); }
  bool contains(std::string_view instruction) const;

  /// The most recently added instruction. Requires a non-empty list.
  const std::string& newest() const;

  /// [instruction] ++ *this. Throws if the instruction is already present.
  InstructionList prepended(std::string instruction) const;

  /// Same list with the newest instruction swapped for `replacement`.
  InstructionList with_newest_replaced(std::string replacement) const;

  auto operator<=>(const InstructionList&) const = default;

 private:
  std::vector<std::string> items_;
};

enum class TemplateName { Eli5Base, ContinuationBase, Para, Disc, Ins, MC, ProbeRevision, ProbeJudge };

std::string_view to_string(TemplateName name) noexcept;

/// A fixed prompt body with {named} placeholders.
struct PromptTemplate {
  TemplateName name;
  std::string_view body;
};

const PromptTemplate& prompt_template(TemplateName name);

/// Single-pass substitution: bound values are inserted verbatim and never
/// re-scanned. Throws Config for a placeholder without a binding.
std::string render(std::string_view body, const std::map<std::string, std::string>& bindings);

/// G(t, a, x): base task header, then one instruction per line, then the
/// instance block of the task's template.
std::string render_prompt(const corpus::TaskSpec& task, const InstructionList& instructions);

/// First `n_tokens` whitespace tokens of an article, used as a continuation prefix.
std::string continuation_prefix(std::string_view article, std::size_t n_tokens = 30);

std::string render_para(std::string_view generation, int min_words = 300);

/// Feedback prompt: G1 = human writings, G2 = AI writings.
std::string render_disc(std::span<const std::string> human_texts,
                        std::span<const std::string> ai_texts, std::size_t n_feed);

std::string render_ins(std::span<const std::string> feedback);
std::string render_mc(std::string_view instruction);
std::string render_revision(std::string_view criterion, std::string_view question);
std::string render_judge(std::string_view criterion, std::string_view answer1,
                         std::string_view answer2);

/// "1. a\n2. b" rendering used for feedback blocks.
std::string format_numbered_list(std::span<const std::string> items);

/// Parses list items introduced by "1.", "1)", "-", "*" or a bullet.
/// Unmarked lines continue the previous item; text before the first marker is ignored.
std::vector<std::string> parse_numbered_list(std::string_view text);

}  // namespace failopt::llm
