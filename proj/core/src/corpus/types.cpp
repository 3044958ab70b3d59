#include "failopt/corpus/types.hpp"

#include <unordered_set>

#include "failopt/corpus/text.hpp"
#include "failopt/error.hpp"

namespace failopt::corpus {

std::string_view to_string(Author a) noexcept { return a == Author::Human ? "Human" : "AI"; }

std::string_view to_string(Task t) noexcept {
  switch (t) {
    case Task::ELI5: return "ELI5";
    case Task::XSum: return "XSum";
    case Task::SQuAD: return "SQuAD";
    case Task::Synthetic: return "Synthetic";
  }
  return "Synthetic";
}

std::string_view to_string(SplitName s) noexcept {
  switch (s) {
    case SplitName::Train: return "Train";
    case SplitName::Validation: return "Validation";
    case SplitName::Test: return "Test";
  }
  return "Train";
}

Task parse_task(std::string_view name) {
  if (name == "ELI5" || name == "eli5") return Task::ELI5;
  if (name == "XSum" || name == "xsum") return Task::XSum;
  if (name == "SQuAD" || name == "squad") return Task::SQuAD;
  if (name == "Synthetic" || name == "synthetic") return Task::Synthetic;
  throw Error(Errc::Config, "unknown task '" + std::string(name) + "'");
}

TextSample TextSample::make(std::string id, std::string text, Author author, Task task) {
  TextSample s{std::move(id), std::move(text), author, task, 0};
  s.token_count = count_tokens(s.text);
  return s;
}

std::optional<std::string_view> QARecord::generation(std::string_view name) const {
  auto it = generations.find(std::string(name));
  if (it == generations.end()) return std::nullopt;
  return std::string_view(it->second);
}

void require_disjoint(const DatasetSplit& a, const DatasetSplit& b) {
  std::unordered_set<std::string> ids;
  for (const auto& r : a.records) ids.insert(r.id);
  for (const auto& r : b.records) {
    if (ids.contains(r.id)) {
      throw Error(Errc::DegenerateData, "record '" + r.id + "' appears in both " +
                                            std::string(to_string(a.name)) + " and " +
                                            std::string(to_string(b.name)));
    }
  }
}

}  // namespace failopt::corpus
