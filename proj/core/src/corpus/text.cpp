#include "failopt/corpus/text.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <limits>
#include <mutex>
#include <regex>

#include "failopt/error.hpp"

namespace failopt::corpus {
namespace {

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

constexpr std::array<std::string_view, 6> kAbbreviations = {"e.g.", "i.e.", "Mr.", "Dr.", "vs.",
                                                            "etc."};

bool is_abbreviation(std::string_view word) {
  const auto lower = ascii_lower(word);
  return std::any_of(kAbbreviations.begin(), kAbbreviations.end(),
                     [&](std::string_view a) { return ascii_lower(a) == lower; });
}

std::mutex g_tokenizer_mu;
std::shared_ptr<const Tokenizer> g_tokenizer = std::make_shared<WhitespaceTokenizer>();

}  // namespace

std::vector<TokenSpan> WhitespaceTokenizer::spans(std::string_view text) const {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i == text.size()) break;
    const std::size_t begin = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    out.push_back({begin, i});
  }
  return out;
}

std::size_t WhitespaceTokenizer::count(std::string_view text) const {
  std::size_t n = 0;
  bool in_token = false;
  for (char c : text) {
    const bool space = is_space(c);
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

const Tokenizer& active_tokenizer() {
  std::lock_guard lock(g_tokenizer_mu);
  return *g_tokenizer;
}

void set_active_tokenizer(std::shared_ptr<const Tokenizer> tokenizer) {
  std::lock_guard lock(g_tokenizer_mu);
  g_tokenizer = tokenizer ? std::move(tokenizer) : std::make_shared<WhitespaceTokenizer>();
}

std::size_t count_tokens(std::string_view text, const Tokenizer& tok) { return tok.count(text); }

std::vector<std::string> truncate_to_shortest(std::span<const std::string> texts,
                                              const Tokenizer& tok) {
  if (texts.empty()) throw Error(Errc::EmptyInput, "truncate_to_shortest: no texts");
  std::vector<std::vector<TokenSpan>> spans;
  spans.reserve(texts.size());
  std::size_t shortest = std::numeric_limits<std::size_t>::max();
  for (const auto& t : texts) {
    spans.push_back(tok.spans(t));
    if (spans.back().empty()) throw Error(Errc::EmptyInput, "truncate_to_shortest: empty text");
    shortest = std::min(shortest, spans.back().size());
  }
  std::vector<std::string> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.push_back(texts[i].substr(0, spans[i][shortest - 1].end));
  }
  return out;
}

bool length_filter(const QARecord& record, std::string_view attack, LengthBounds bounds,
                   const Tokenizer& tok) {
  const auto base = record.base_generation();
  const auto attacked = record.generation(attack);
  if (record.human_answer.empty() || !base || !attacked) {
    throw Error(Errc::MissingField, "record '" + record.id + "' lacks the human answer, base " +
                                        "generation or '" + std::string(attack) + "' generation");
  }
  for (std::string_view text : {std::string_view(record.human_answer), *base, *attacked}) {
    const auto n = tok.count(text);
    if (n < bounds.lo || n > bounds.hi) return false;
  }
  return true;
}

std::span<const std::string_view> sentence_abbreviations() { return kAbbreviations; }

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 < text.size() && !is_space(text[i + 1])) continue;
    std::size_t next = i + 1;
    while (next < text.size() && is_space(text[next])) ++next;
    if (next < text.size()) {
      const auto lead = static_cast<unsigned char>(text[next]);
      if (!std::isupper(lead) && !std::isdigit(lead)) continue;
    }
    if (c == '.') {
      std::size_t w = i;
      while (w > start && !is_space(text[w - 1])) --w;
      if (is_abbreviation(text.substr(w, i + 1 - w))) continue;
    }
    const auto sentence = trim(text.substr(start, i + 1 - start));
    if (!sentence.empty()) out.emplace_back(sentence);
    start = i + 1;
  }
  const auto tail = trim(text.substr(std::min(start, text.size())));
  if (!tail.empty()) out.emplace_back(tail);
  return out;
}

std::string clean_eli5_question(std::string_view question) {
  // The apostrophe may be ASCII or U+2019; "5" and a missing apostrophe also occur.
  static const std::regex kPhrase(
      R"([\s,;:(\-]*explain\s+like\s+i(?:'|\xE2\x80\x99)?m\s+(?:five|5)[\s:;,.!?)\-]*)",
      std::regex::icase);
  std::string out;
  std::string_view rest = question;
  std::cmatch m;
  while (std::regex_search(rest.data(), rest.data() + rest.size(), m, kPhrase)) {
    const auto before = trim(rest.substr(0, static_cast<std::size_t>(m.position(0))));
    if (!before.empty()) {
      if (!out.empty()) out += ' ';
      out.append(before);
    }
    rest.remove_prefix(static_cast<std::size_t>(m.position(0) + m.length(0)));
  }
  const auto after = trim(rest);
  if (!after.empty()) {
    if (!out.empty()) out += ' ';
    out.append(after);
  }
  return out;
}

}  // namespace failopt::corpus
