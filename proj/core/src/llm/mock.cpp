#include "failopt/llm/mock.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>

#include "failopt/error.hpp"
#include "failopt/llm/prompt.hpp"
#include "failopt/rng.hpp"

namespace failopt::llm {
namespace {

constexpr std::string_view kDiscTail = "Provide a list containing ";
constexpr std::string_view kInsHead = "You are a helpful assistant that generate brief instructions";
constexpr std::string_view kMcHead = "Generate a variation of the input instruction";
constexpr std::string_view kRevisionHead = "You will be given a question and a major difference";
constexpr std::string_view kJudgeHead = "You will be given two answers";
constexpr std::string_view kParaHead = "Paraphrase this using at least ";
constexpr std::string_view kContinuationHead = "Initial words:\n";
constexpr std::string_view kContinuationTask = "\n\nComplete the article with at least ";
constexpr std::string_view kContinuationTaskEnd = "based on the initial words.";
constexpr std::string_view kQuestionBlock = "\nQuestion:\n";
constexpr std::string_view kAnswerTail = "\n\nAnswer:";
constexpr std::string_view kRefusal = "I'm sorry, but I cannot help with that request.";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> out;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto line = trim(text.substr(0, nl));
    if (!line.empty()) out.emplace_back(line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return out;
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

// Text between `open` and the next `close` after it.
std::string_view between(std::string_view text, std::string_view open, std::string_view close) {
  const auto a = text.find(open);
  if (a == std::string_view::npos) throw Error(Errc::UnrecognizedPrompt, "missing '" + std::string(open) + "'");
  const auto start = a + open.size();
  const auto b = text.find(close, start);
  if (b == std::string_view::npos) throw Error(Errc::UnrecognizedPrompt, "missing '" + std::string(close) + "'");
  return text.substr(start, b - start);
}

std::string_view instance_key(std::string_view instance) {
  instance = trim(instance);
  return instance.substr(0, instance.find_first_of(" \t\r\n"));
}

std::vector<std::string> draw_words(const MockScenario& s, Rng& rng, std::size_t n) {
  std::vector<std::string> words;
  words.reserve(n);
  for (std::size_t i = 0; i < n; ++i) words.push_back(s.vocabulary[rng.index(s.vocabulary.size())]);
  return words;
}

// Sentence layout: runs of sentence_length tokens, first letter capitalized,
// trailing period on the last token of each run.
std::string layout(const MockScenario& s, std::vector<std::string> words, Rng& rng) {
  std::string out;
  std::size_t i = 0;
  while (i < words.size()) {
    const auto len = static_cast<std::size_t>(rng.between(s.sentence_length.first, s.sentence_length.second));
    const auto end = std::min(words.size(), i + len);
    auto& first = words[i];
    if (!first.empty() && std::islower(static_cast<unsigned char>(first[0]))) {
      first[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(first[0])));
    }
    words[end - 1] += '.';
    for (std::size_t k = i; k < end; ++k) {
      if (!out.empty()) out += ' ';
      out += words[k];
    }
    i = end;
  }
  return out;
}

void insert_within_anchor(const MockScenario& s, std::vector<std::string>& words, Rng& rng,
                          const std::string& token) {
  const auto limit = std::min<std::size_t>(static_cast<std::size_t>(s.anchor_window), words.size());
  const auto pos = rng.index(limit + 1);
  words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), token);
}

std::string numbered(const std::vector<std::string>& items) { return format_numbered_list(items); }

// Registered variants of an instruction family, original first.
std::vector<std::string> family_of(const MockScenario& s, std::string_view instruction) {
  const auto matches = [&](const std::string& head, const std::vector<std::string>& paras) {
    return head == instruction || std::find(paras.begin(), paras.end(), instruction) != paras.end();
  };
  for (const auto& m : s.markers) {
    if (matches(m.suppression_instruction, m.paraphrases)) {
      std::vector<std::string> f{m.suppression_instruction};
      f.insert(f.end(), m.paraphrases.begin(), m.paraphrases.end());
      return f;
    }
  }
  for (const auto& d : s.distractors) {
    if (matches(d.instruction, d.paraphrases)) {
      std::vector<std::string> f{d.instruction};
      f.insert(f.end(), d.paraphrases.begin(), d.paraphrases.end());
      return f;
    }
  }
  return {};
}

std::string respond_disc(const MockScenario& s, std::string_view prompt) {
  const auto tail = prompt.find(kDiscTail);
  const auto n_feed = std::stoul(std::string(between(prompt.substr(tail), kDiscTail, " ")));
  static const std::regex kHeader(R"(^G([12])'s writing #(\d+)\.?$)");
  std::vector<std::string> g1, g2;
  std::vector<std::string>* current = nullptr;
  auto body = prompt.substr(0, tail);
  while (!body.empty()) {
    const auto nl = body.find('\n');
    const std::string line(body.substr(0, nl));
    body.remove_prefix(nl == std::string_view::npos ? body.size() : nl + 1);
    std::smatch m;
    if (std::regex_match(line, m, kHeader)) {
      current = m[1] == "1" ? &g1 : &g2;
      current->emplace_back();
    } else if (current && !trim(line).empty()) {
      if (!current->back().empty()) current->back() += '\n';
      current->back() += line;
    }
  }
  if (g1.empty() || g2.empty()) throw Error(Errc::UnrecognizedPrompt, "feedback prompt lacks G1 or G2 writings");

  const auto rate = [](const std::vector<std::string>& texts, const std::string& token) {
    double hits = 0;
    for (const auto& t : texts) hits += t.find(token) != std::string::npos ? 1.0 : 0.0;
    return hits / static_cast<double>(texts.size());
  };
  struct Item {
    double gap;
    std::string text;
  };
  std::vector<Item> items;
  for (const auto& m : s.markers) {
    items.push_back({rate(g2, m.token) - rate(g1, m.token), s.feedback_phrasings.at(m.token)});
  }
  for (const auto& d : s.distractors) items.push_back({0.0, d.feedback});
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.gap > b.gap; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < items.size() && i < n_feed; ++i) out.push_back(items[i].text);
  return numbered(out);
}

std::string respond_ins(const MockScenario& s, std::string_view prompt) {
  const auto pos = prompt.find("Feedbacks:\n");
  if (pos == std::string_view::npos) throw Error(Errc::UnrecognizedPrompt, "conversion prompt lacks feedbacks");
  std::vector<std::string> out;
  for (const auto& item : parse_numbered_list(prompt.substr(pos + 11))) {
    std::string instruction;
    for (const auto& m : s.markers) {
      if (s.feedback_phrasings.at(m.token) == item) instruction = m.suppression_instruction;
    }
    for (const auto& d : s.distractors) {
      if (d.feedback == item) instruction = d.instruction;
    }
    if (instruction.empty()) throw Error(Errc::UnrecognizedPrompt, "unregistered feedback item '" + item + "'");
    out.push_back(instruction);
  }
  return numbered(out);
}

std::string respond_mc(const MockScenario& s, std::string_view prompt, int sample_index) {
  const auto instruction = std::string(trim(between(prompt, "Input:\n", "\n\nOutput:")));
  auto family = family_of(s, instruction);
  if (family.empty()) throw Error(Errc::UnrecognizedPrompt, "unregistered instruction '" + instruction + "'");
  std::erase(family, instruction);
  if (family.empty()) return instruction;
  return family[static_cast<std::size_t>(sample_index) % family.size()];
}

std::string respond_revision(const MockScenario& s, std::string_view prompt, int sample_index) {
  const auto criterion = lower(between(prompt, "Major Difference between human and ChatGPT:\n", "\nQ: "));
  const auto qpos = prompt.rfind("\nQ: ");
  auto question = prompt.substr(qpos + 4);
  if (!question.ends_with("\nA:")) throw Error(Errc::UnrecognizedPrompt, "revision prompt lacks answer slot");
  question.remove_suffix(3);
  std::vector<std::string> lines;
  for (const auto& m : s.markers) {
    if (criterion.find(lower(s.feedback_phrasings.at(m.token))) != std::string::npos ||
        criterion.find(lower(m.suppression_instruction)) != std::string::npos) {
      lines.push_back(m.suppression_instruction);
    }
  }
  return mock_answer(s, question, sample_index, lines);
}

std::string respond_judge(const MockScenario& s, std::string_view prompt) {
  const auto a1 = between(prompt, "\nAnswer 1:\n", "\nAnswer 2:\n");
  const auto a2 = between(prompt, "\nAnswer 2:\n", "\nHuman-like answer:");
  std::size_t m1 = 0, m2 = 0;
  for (const auto& m : s.markers) {
    m1 += count_occurrences(a1, m.token);
    m2 += count_occurrences(a2, m.token);
  }
  return m2 < m1 ? "Answer 2" : "Answer 1";
}

std::string respond_para(const MockScenario& s, std::string_view prompt, int sample_index) {
  const auto text = between(prompt, "words.\n\n", "\n\nParaphrase:");
  Rng rng(derive_seed(s.seed, "para|" + std::to_string(fnv1a64(text)) + "|" + std::to_string(sample_index)));
  std::vector<std::string> words;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto start = rest.find_first_not_of(" \t\r\n");
    if (start == std::string_view::npos) break;
    rest.remove_prefix(start);
    const auto end = std::min(rest.find_first_of(" \t\r\n"), rest.size());
    const auto token = rest.substr(0, end);
    rest.remove_prefix(end);
    std::string kept;
    for (const auto& m : s.markers) {
      if (token.find(m.token) != std::string_view::npos) kept = m.token;
      if (!m.trace_token.empty() && token.find(m.trace_token) != std::string_view::npos) kept = m.trace_token;
    }
    words.push_back(kept.empty() ? s.vocabulary[rng.index(s.vocabulary.size())] : kept);
  }
  return layout(s, std::move(words), rng);
}

std::string respond_task(const MockScenario& s, std::string_view instance,
                         const std::vector<std::string>& instruction_lines, int sample_index) {
  const auto key = std::string(instance_key(instance));
  if (std::find(s.refusals.begin(), s.refusals.end(), key) != s.refusals.end()) return std::string(kRefusal);
  if (auto it = s.base_texts.find(key); it != s.base_texts.end()) return it->second;
  return mock_answer(s, trim(instance), sample_index, instruction_lines);
}

}  // namespace

void MockScenario::validate() const {
  const auto fail = [&](const std::string& what) { throw Error(Errc::Config, "scenario '" + id + "': " + what); };
  if (id.empty()) throw Error(Errc::Config, "scenario id is empty");
  if (vocabulary.empty()) fail("vocabulary is empty");
  if (human_length_range.first < 1 || human_length_range.first > human_length_range.second) {
    fail("bad human_length_range");
  }
  if (sentence_length.first < 1 || sentence_length.first > sentence_length.second) fail("bad sentence_length");
  if (anchor_window < 0) fail("anchor_window is negative");
  std::vector<std::string> planted;
  for (const auto& m : markers) {
    if (m.token.empty()) fail("marker with empty token");
    if (!(m.insert_rate > 0.0 && m.insert_rate <= 1.0)) fail("insert_rate of " + m.token + " outside (0, 1]");
    if (m.suppression_instruction.empty() || m.suppression_instruction.find('\n') != std::string::npos) {
      fail("marker " + m.token + " needs a single-line suppression instruction");
    }
    if (!feedback_phrasings.contains(m.token)) fail("no feedback phrasing for " + m.token);
    planted.push_back(m.token);
    if (!m.trace_token.empty()) planted.push_back(m.trace_token);
  }
  for (const auto& w : vocabulary) {
    if (w.empty() || w.find_first_of(" \t\r\n") != std::string::npos) fail("vocabulary entries must be single tokens");
    for (const auto& p : planted) {
      if (w.find(p) != std::string::npos || p.find(w) != std::string::npos) {
        fail("planted token " + p + " overlaps vocabulary entry " + w);
      }
    }
  }
  for (const auto& d : distractors) {
    if (d.feedback.empty() || d.instruction.empty()) fail("distractor with empty feedback or instruction");
  }
}

void to_json(nlohmann::json& j, const MockScenario& s) {
  nlohmann::json markers = nlohmann::json::array();
  for (const auto& m : s.markers) {
    markers.push_back({{"token", m.token},
                       {"insert_rate", m.insert_rate},
                       {"suppression_instruction", m.suppression_instruction},
                       {"paraphrases", m.paraphrases},
                       {"trace_token", m.trace_token}});
  }
  nlohmann::json distractors = nlohmann::json::array();
  for (const auto& d : s.distractors) {
    distractors.push_back({{"feedback", d.feedback}, {"instruction", d.instruction}, {"paraphrases", d.paraphrases}});
  }
  j = {{"id", s.id},
       {"seed", s.seed},
       {"vocabulary", s.vocabulary},
       {"human_length_range", {s.human_length_range.first, s.human_length_range.second}},
       {"sentence_length", {s.sentence_length.first, s.sentence_length.second}},
       {"anchor_window", s.anchor_window},
       {"markers", markers},
       {"feedback_phrasings", s.feedback_phrasings},
       {"distractors", distractors},
       {"base_texts", s.base_texts},
       {"refusals", s.refusals}};
}

void from_json(const nlohmann::json& j, MockScenario& s) {
  s = MockScenario{};
  s.id = j.at("id").get<std::string>();
  s.seed = j.value("seed", s.seed);
  s.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
  if (j.contains("human_length_range")) {
    const auto r = j.at("human_length_range").get<std::vector<int>>();
    if (r.size() != 2) throw Error(Errc::Config, "human_length_range needs two values");
    s.human_length_range = {r[0], r[1]};
  }
  if (j.contains("sentence_length")) {
    const auto r = j.at("sentence_length").get<std::vector<int>>();
    if (r.size() != 2) throw Error(Errc::Config, "sentence_length needs two values");
    s.sentence_length = {r[0], r[1]};
  }
  s.anchor_window = j.value("anchor_window", s.anchor_window);
  for (const auto& m : j.value("markers", nlohmann::json::array())) {
    s.markers.push_back({m.at("token").get<std::string>(), m.value("insert_rate", 1.0),
                         m.at("suppression_instruction").get<std::string>(),
                         m.value("paraphrases", std::vector<std::string>{}),
                         m.value("trace_token", std::string{})});
  }
  s.feedback_phrasings = j.value("feedback_phrasings", std::map<std::string, std::string>{});
  for (const auto& d : j.value("distractors", nlohmann::json::array())) {
    s.distractors.push_back({d.at("feedback").get<std::string>(), d.at("instruction").get<std::string>(),
                             d.value("paraphrases", std::vector<std::string>{})});
  }
  s.base_texts = j.value("base_texts", std::map<std::string, std::string>{});
  s.refusals = j.value("refusals", std::vector<std::string>{});
}

MockScenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open scenario " + path.string());
  MockScenario s;
  try {
    s = nlohmann::json::parse(in).get<MockScenario>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Config, "malformed scenario " + path.string() + ": " + e.what());
  }
  s.validate();
  return s;
}

std::vector<std::size_t> suppressed_markers(const MockScenario& s,
                                            std::span<const std::string> instruction_lines) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.markers.size(); ++i) {
    const auto& m = s.markers[i];
    const bool hit = std::any_of(instruction_lines.begin(), instruction_lines.end(), [&](const std::string& line) {
      const auto t = trim(line);
      return t == m.suppression_instruction ||
             std::find(m.paraphrases.begin(), m.paraphrases.end(), t) != m.paraphrases.end();
    });
    if (hit) out.push_back(i);
  }
  return out;
}

std::string mock_human_answer(const MockScenario& s, std::string_view question) {
  Rng rng(derive_seed(s.seed, "human|" + std::string(question)));
  const auto n = static_cast<std::size_t>(rng.between(s.human_length_range.first, s.human_length_range.second));
  return layout(s, draw_words(s, rng, n), rng);
}

std::string mock_answer(const MockScenario& s, std::string_view instance, int sample_index,
                        std::span<const std::string> instruction_lines) {
  const auto tag = std::string(instance) + "|" + std::to_string(sample_index);
  Rng rng(derive_seed(s.seed, "answer|" + tag));
  const auto n = static_cast<std::size_t>(rng.between(s.human_length_range.first, s.human_length_range.second));
  auto words = draw_words(s, rng, n);
  const auto suppressed = suppressed_markers(s, instruction_lines);
  for (std::size_t i = 0; i < s.markers.size(); ++i) {
    const auto& m = s.markers[i];
    Rng mrng(derive_seed(s.seed, "marker|" + m.token + "|" + tag));
    const bool present = mrng.bernoulli(m.insert_rate);
    if (std::find(suppressed.begin(), suppressed.end(), i) != suppressed.end()) {
      if (!m.trace_token.empty()) insert_within_anchor(s, words, mrng, m.trace_token);
    } else if (present) {
      insert_within_anchor(s, words, mrng, m.token);
    }
  }
  return layout(s, std::move(words), rng);
}

std::string mock_question(const MockScenario& s, std::size_t index) {
  Rng rng(derive_seed(s.seed, "question|" + std::to_string(index)));
  const auto n = static_cast<std::size_t>(rng.between(6, 12));
  auto words = draw_words(s, rng, n);
  words.front()[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(words.front()[0])));
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out + "?";
}

std::string mock_llm(const MockScenario& s, const std::string& prompt, const GenerationParams& params,
                     int sample_index) {
  const int sample = params.temperature > 0.0 ? sample_index : 0;
  const std::string_view p = prompt;
  if (p.starts_with("G1's writing #") && p.find(kDiscTail) != std::string_view::npos) return respond_disc(s, p);
  if (p.starts_with(kInsHead)) return respond_ins(s, p);
  if (p.starts_with(kMcHead)) return respond_mc(s, p, sample);
  if (p.starts_with(kRevisionHead)) return respond_revision(s, p, sample);
  if (p.starts_with(kJudgeHead)) return respond_judge(s, p);
  if (p.starts_with(kParaHead)) return respond_para(s, p, sample);
  if (p.starts_with(kContinuationHead)) {
    const auto task = p.find(kContinuationTask);
    const auto end = p.find(kContinuationTaskEnd, task == std::string_view::npos ? 0 : task);
    if (task == std::string_view::npos || end == std::string_view::npos) {
      throw Error(Errc::UnrecognizedPrompt, "malformed continuation prompt");
    }
    const auto prefix = p.substr(kContinuationHead.size(), task - kContinuationHead.size());
    return respond_task(s, prefix, split_lines(p.substr(end + kContinuationTaskEnd.size())), sample);
  }
  if (const auto q = p.rfind(kQuestionBlock); q != std::string_view::npos && p.ends_with(kAnswerTail)) {
    const auto instance = p.substr(q + kQuestionBlock.size(), p.size() - kAnswerTail.size() - q - kQuestionBlock.size());
    auto lines = split_lines(p.substr(0, q));
    if (lines.empty()) throw Error(Errc::UnrecognizedPrompt, "task prompt lacks a header line");
    lines.erase(lines.begin());
    return respond_task(s, instance, lines, sample);
  }
  throw Error(Errc::UnrecognizedPrompt, "no scenario rule matches prompt starting '" +
                                            std::string(p.substr(0, 60)) + "'");
}

MockBackend::MockBackend(MockScenario scenario) : scenario_(std::move(scenario)) { scenario_.validate(); }

std::string MockBackend::complete(const std::string& prompt, const GenerationParams& params,
                                  int sample_index) const {
  return mock_llm(scenario_, prompt, params, sample_index);
}

}  // namespace failopt::llm
