#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "failopt/corpus/types.hpp"

namespace failopt::corpus {

/// Byte range [begin, end) of one token inside its source text.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Pluggable tokenization rule. Every length-dependent protocol step
/// (counting, truncation, the length filter) goes through one of these.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<TokenSpan> spans(std::string_view text) const = 0;
  virtual std::size_t count(std::string_view text) const { return spans(text).size(); }
};

/// Tokens are maximal runs of non-whitespace characters.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::vector<TokenSpan> spans(std::string_view text) const override;
  std::size_t count(std::string_view text) const override;
};

/// The process-wide tokenizer used when callers do not pass one.
const Tokenizer& active_tokenizer();
void set_active_tokenizer(std::shared_ptr<const Tokenizer> tokenizer);

std::size_t count_tokens(std::string_view text, const Tokenizer& tok = active_tokenizer());

/// Cuts every text to the token length of the shortest one. Only whole tokens
/// are kept and the whitespace between kept tokens is left untouched.
std::vector<std::string> truncate_to_shortest(std::span<const std::string> texts,
                                              const Tokenizer& tok = active_tokenizer());

struct LengthBounds {
  std::size_t lo = 256;
  std::size_t hi = 450;
};

/// True iff the human answer, the base generation and the named attacked
/// generation all have token counts inside [lo, hi].
bool length_filter(const QARecord& record, std::string_view attack, LengthBounds bounds = {},
                   const Tokenizer& tok = active_tokenizer());

/// Abbreviations that never end a sentence.
std::span<const std::string_view> sentence_abbreviations();

/// Rule-based splitter: a sentence ends at '.', '!' or '?' followed by
/// whitespace and then an uppercase letter or digit, unless the word ending
/// there is a listed abbreviation. Returned sentences are trimmed and never empty.
std::vector<std::string> split_sentences(std::string_view text);

/// Removes every case-insensitive "Explain like I'm five" together with the
/// punctuation/space run next to it.
std::string clean_eli5_question(std::string_view question);

}  // namespace failopt::corpus
