#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace failopt::corpus {

enum class Author { Human, AI };
enum class Task { ELI5, XSum, SQuAD, Synthetic };
enum class SplitName { Train, Validation, Test };

std::string_view to_string(Author a) noexcept;
std::string_view to_string(Task t) noexcept;
std::string_view to_string(SplitName s) noexcept;
Task parse_task(std::string_view name);

/// Generation key under which the base-prompt (no attack) output is stored.
inline constexpr std::string_view kBaseGeneration = "N/A";

/// One text with its ground-truth author; the unit a detector scores.
struct TextSample {
  std::string id;
  std::string text;
  Author author = Author::Human;
  Task task = Task::Synthetic;
  std::size_t token_count = 0;

  /// Builds a sample with token_count taken from the active tokenizer.
  static TextSample make(std::string id, std::string text, Author author, Task task);
};

/// Which base task description a prompt is rendered from.
enum class TaskTemplate { Eli5, Continuation, Custom };

/// The main task t and instance x of a generation request.
struct TaskSpec {
  TaskTemplate kind = TaskTemplate::Eli5;
  std::string task_description;  // only read when kind == Custom
  std::string instance;
  int min_words = 300;
};

/// An input instance with its human answer and any generations collected for
/// it, keyed by attack name (kBaseGeneration for the base prompt).
struct QARecord {
  std::string id;
  std::string question;
  std::string human_answer;
  std::map<std::string, std::string> generations;

  std::optional<std::string_view> generation(std::string_view name) const;
  std::optional<std::string_view> base_generation() const { return generation(kBaseGeneration); }

  bool operator==(const QARecord&) const = default;
};

struct DatasetSplit {
  SplitName name = SplitName::Train;
  std::vector<QARecord> records;

  bool operator==(const DatasetSplit&) const = default;
};

/// Throws DegenerateData when the two splits share a record id.
void require_disjoint(const DatasetSplit& a, const DatasetSplit& b);

}  // namespace failopt::corpus
