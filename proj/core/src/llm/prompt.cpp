#include "failopt/llm/prompt.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "failopt/corpus/text.hpp"
#include "failopt/error.hpp"

namespace failopt::llm {
namespace {

constexpr std::array<PromptTemplate, 8> kTemplates = {{
    {TemplateName::Eli5Base,
     "Answer with at least {min_words} words.\n{instructions}\nQuestion:\n{question}\n\nAnswer:"},
    {TemplateName::ContinuationBase,
     "Initial words:\n{prefix}\n\nComplete the article with at least {min_words} words, based on "
     "the initial words.{instructions}"},
    {TemplateName::Para, "Paraphrase this using at least {min_words} words.\n\n{text}\n\nParaphrase:"},
    {TemplateName::Disc,
     "{writings}Provide a list containing {n_feed} general, representative characteristics of "
     "G1's writings compared to G2's writings.\n\nList of {n_feed} characteristics:"},
    {TemplateName::Ins,
     "You are a helpful assistant that generate brief instructions to help others write like G1's "
     "answers. You will be provided with a list of feedbacks. Convert each feedback to a brief "
     "instruction asking you to write like G1's answers. Only mention what to do in each "
     "instruction. Do not mention 'G1' or 'G2' in the instructions.\nFeedbacks:\n{feedback}"},
    {TemplateName::MC,
     "Generate a variation of the input instruction while keeping the semantic meaning.\n\n"
     "Input:\n{instruction}\n\nOutput:"},
    {TemplateName::ProbeRevision,
     "You will be given a question and a major difference between human and ChatGPT.\n"
     "Your task is to write a human-like answer.\n"
     "Please make sure you read and understand these instructions carefully.\n"
     "Major Difference between human and ChatGPT:\n{criterion}\nQ: {question}\nA:"},
    {TemplateName::ProbeJudge,
     "You will be given two answers written for the same question.\n"
     "Your task is to find the most human-like answer.\n"
     "Please make sure you read and understand these instructions carefully.\n"
     "Evaluation Criteria:\n{criterion}\nAnswer 1:\n{answer1}\nAnswer 2:\n{answer2}\n"
     "Human-like answer:"},
}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Length of a list marker at the start of `line`, or 0 when there is none.
std::size_t list_marker_length(std::string_view line) {
  if (line.starts_with("- ") || line.starts_with("* ")) return 2;
  if (line.starts_with("\xE2\x80\xA2")) return 3;  // U+2022 bullet
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == 0 || i > 3 || i >= line.size()) return 0;
  if (line[i] != '.' && line[i] != ')') return 0;
  return i + 1;
}

}  // namespace

InstructionList::InstructionList(std::vector<std::string> instructions) {
  items_.reserve(instructions.size());
  for (auto& s : instructions) {
    if (s.empty()) throw Error(Errc::Config, "instruction lists cannot hold empty instructions");
    if (s.find('\n') != std::string::npos) {
      throw Error(Errc::Config, "instructions must be single lines: '" + s + "'");
    }
    if (contains(s)) throw Error(Errc::Config, "duplicate instruction '" + s + "'");
    items_.push_back(std::move(s));
  }
}

bool InstructionList::contains(std::string_view instruction) const {
  return std::find(items_.begin(), items_.end(), instruction) != items_.end();
}

const std::string& InstructionList::newest() const {
  if (items_.empty()) throw Error(Errc::EmptyInput, "empty instruction list has no newest entry");
  return items_.front();
}

InstructionList InstructionList::prepended(std::string instruction) const {
  std::vector<std::string> next;
  next.reserve(items_.size() + 1);
  next.push_back(std::move(instruction));
  next.insert(next.end(), items_.begin(), items_.end());
  return InstructionList(std::move(next));
}

InstructionList InstructionList::with_newest_replaced(std::string replacement) const {
  auto next = items_;
  if (next.empty()) throw Error(Errc::EmptyInput, "empty instruction list has no newest entry");
  next.front() = std::move(replacement);
  return InstructionList(std::move(next));
}

std::string_view to_string(TemplateName name) noexcept {
  switch (name) {
    case TemplateName::Eli5Base: return "Eli5Base";
    case TemplateName::ContinuationBase: return "ContinuationBase";
    case TemplateName::Para: return "Para";
    case TemplateName::Disc: return "Disc";
    case TemplateName::Ins: return "Ins";
    case TemplateName::MC: return "MC";
    case TemplateName::ProbeRevision: return "ProbeRevision";
    case TemplateName::ProbeJudge: return "ProbeJudge";
  }
  return "Unknown";
}

const PromptTemplate& prompt_template(TemplateName name) {
  for (const auto& t : kTemplates) {
    if (t.name == name) return t;
  }
  throw Error(Errc::Config, "no template registered for name");
}

std::string render(std::string_view body, const std::map<std::string, std::string>& bindings) {
  std::string out;
  out.reserve(body.size());
  std::size_t i = 0;
  while (i < body.size()) {
    const auto open = body.find('{', i);
    if (open == std::string_view::npos) {
      out.append(body.substr(i));
      break;
    }
    out.append(body.substr(i, open - i));
    const auto close = body.find('}', open);
    if (close == std::string_view::npos) {
      throw Error(Errc::Config, "unterminated placeholder in template");
    }
    const std::string key(body.substr(open + 1, close - open - 1));
    auto it = bindings.find(key);
    if (it == bindings.end()) throw Error(Errc::Config, "unbound placeholder {" + key + "}");
    out.append(it->second);
    i = close + 1;
  }
  return out;
}

std::string render_prompt(const corpus::TaskSpec& task, const InstructionList& instructions) {
  const auto min_words = std::to_string(task.min_words);
  switch (task.kind) {
    case corpus::TaskTemplate::Eli5:
    case corpus::TaskTemplate::Custom: {
      std::string lines;
      for (const auto& s : instructions.items()) lines += s + "\n";
      if (task.kind == corpus::TaskTemplate::Eli5) {
        return render(prompt_template(TemplateName::Eli5Base).body,
                      {{"min_words", min_words}, {"instructions", lines}, {"question", task.instance}});
      }
      if (task.task_description.empty() || task.task_description.find('\n') != std::string::npos) {
        throw Error(Errc::Config, "custom task descriptions must be a single non-empty line");
      }
      return task.task_description + "\n" + lines + "\nQuestion:\n" + task.instance + "\n\nAnswer:";
    }
    case corpus::TaskTemplate::Continuation: {
      std::string block;
      for (const auto& s : instructions.items()) block += "\n" + s;
      return render(prompt_template(TemplateName::ContinuationBase).body,
                    {{"min_words", min_words}, {"prefix", task.instance}, {"instructions", block}});
    }
  }
  throw Error(Errc::Config, "unknown task template");
}

std::string continuation_prefix(std::string_view article, std::size_t n_tokens) {
  const auto spans = corpus::WhitespaceTokenizer().spans(article);
  if (spans.empty()) return {};
  const auto last = spans[std::min(n_tokens, spans.size()) - 1];
  return std::string(article.substr(spans.front().begin, last.end - spans.front().begin));
}

std::string render_para(std::string_view generation, int min_words) {
  return render(prompt_template(TemplateName::Para).body,
                {{"min_words", std::to_string(min_words)}, {"text", std::string(generation)}});
}

std::string render_disc(std::span<const std::string> human_texts,
                        std::span<const std::string> ai_texts, std::size_t n_feed) {
  std::string writings;
  for (std::size_t i = 0; i < human_texts.size(); ++i) {
    writings += "G1's writing #" + std::to_string(i + 1) + ".\n" + human_texts[i] + "\n\n";
  }
  for (std::size_t i = 0; i < ai_texts.size(); ++i) {
    writings += "G2's writing #" + std::to_string(i + 1) + ".\n" + ai_texts[i] + "\n\n";
  }
  return render(prompt_template(TemplateName::Disc).body,
                {{"writings", writings}, {"n_feed", std::to_string(n_feed)}});
}

std::string render_ins(std::span<const std::string> feedback) {
  return render(prompt_template(TemplateName::Ins).body, {{"feedback", format_numbered_list(feedback)}});
}

std::string render_mc(std::string_view instruction) {
  return render(prompt_template(TemplateName::MC).body, {{"instruction", std::string(instruction)}});
}

std::string render_revision(std::string_view criterion, std::string_view question) {
  return render(prompt_template(TemplateName::ProbeRevision).body,
                {{"criterion", std::string(criterion)}, {"question", std::string(question)}});
}

std::string render_judge(std::string_view criterion, std::string_view answer1,
                         std::string_view answer2) {
  return render(prompt_template(TemplateName::ProbeJudge).body,
                {{"criterion", std::string(criterion)},
                 {"answer1", std::string(answer1)},
                 {"answer2", std::string(answer2)}});
}

std::string format_numbered_list(std::span<const std::string> items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1) + ". " + items[i];
  }
  return out;
}

std::vector<std::string> parse_numbered_list(std::string_view text) {
  std::vector<std::string> items;
  bool open = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto raw = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    const auto line = trim(raw);
    if (line.empty()) {
      open = false;
      continue;
    }
    if (const auto n = list_marker_length(line); n > 0) {
      const auto body = trim(line.substr(n));
      if (body.empty()) continue;
      items.emplace_back(body);
      open = true;
    } else if (open) {
      items.back() += ' ';
      items.back() += line;
    }
  }
  return items;
}

}  // namespace failopt::llm
