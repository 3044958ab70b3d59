#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "failopt/corpus/jsonl.hpp"
#include "failopt/corpus/text.hpp"
#include "failopt/error.hpp"
#include "support.hpp"

namespace failopt::corpus {
namespace {

using test::fixture_path;
using test::read_json;
using test::read_text;

std::size_t oracle_count(const std::string& name) {
  return read_json(fixture_path("expected.json")).at(name).get<std::size_t>();
}

TEST(CountTokens, Trivial) {
  EXPECT_EQ(count_tokens("a b  c"), 3u);
  EXPECT_EQ(count_tokens(""), 0u);
  EXPECT_EQ(count_tokens(" \n\t "), 0u);
}

TEST(CountTokens, FixtureParagraph) {
  EXPECT_EQ(count_tokens(read_text(fixture_path("paragraph_312.txt"))), oracle_count("paragraph_312"));
}

TEST(Truncate, Trivial) {
  const std::vector<std::string> in{"a b c", "d e", "f g h i"};
  EXPECT_EQ(truncate_to_shortest(in), (std::vector<std::string>{"a b", "d e", "f g"}));
  const std::vector<std::string> same{"x", "x", "x"};
  EXPECT_EQ(truncate_to_shortest(same), same);
}

TEST(Truncate, RejectsEmpty) {
  const std::vector<std::string> none;
  EXPECT_THROW(truncate_to_shortest(none), Error);
  const std::vector<std::string> blank{"a", ""};
  try {
    truncate_to_shortest(blank);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyInput);
  }
}

TEST(Truncate, FixtureAnswersKeepPrefixAndSpacing) {
  const auto answers = read_json(fixture_path("answers_truncate.json")).get<std::vector<std::string>>();
  const auto out = truncate_to_shortest(answers);
  ASSERT_EQ(out.size(), 3u);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(count_tokens(out[i]), oracle_count("answers_truncate"));
    EXPECT_TRUE(answers[i].starts_with(out[i]));
  }
  EXPECT_EQ(truncate_to_shortest(out), out);
}

TEST(Truncate, PreservesInnerWhitespace) {
  const std::vector<std::string> in{"a \n b\t\tc d", "x y z"};
  const auto out = truncate_to_shortest(in);
  EXPECT_EQ(out[0], "a \n b\t\tc");
}

QARecord record_with(std::size_t h, std::size_t b, std::size_t a) {
  const auto words = [](std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " w" : "w");
    return s;
  };
  QARecord r{"r", "q", words(h), {}};
  r.generations[std::string(kBaseGeneration)] = words(b);
  r.generations["X"] = words(a);
  return r;
}

TEST(LengthFilter, Boundaries) {
  EXPECT_TRUE(length_filter(record_with(300, 300, 300), "X"));
  EXPECT_FALSE(length_filter(record_with(255, 300, 300), "X"));
  EXPECT_TRUE(length_filter(record_with(256, 450, 256), "X"));
  EXPECT_FALSE(length_filter(record_with(300, 451, 300), "X"));
}

TEST(LengthFilter, MissingResponse) {
  try {
    length_filter(record_with(300, 300, 300), "Y");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingField);
  }
}

TEST(LengthFilter, FixtureBatch) {
  const auto split = load_jsonl(fixture_path("filter_batch.jsonl"));
  ASSERT_EQ(split.records.size(), 20u);
  std::size_t passed = 0;
  for (const auto& r : split.records) {
    if (!length_filter(r, "ATTACK")) continue;
    ++passed;
    const std::vector<std::string> triple{r.human_answer, std::string(*r.base_generation()),
                                          std::string(*r.generation("ATTACK"))};
    for (const auto& t : truncate_to_shortest(triple)) {
      EXPECT_GE(count_tokens(t), 256u);
      EXPECT_LE(count_tokens(t), 450u);
    }
  }
  EXPECT_EQ(passed, oracle_count("filter_batch_pass"));
}

TEST(SplitSentences, Trivial) {
  EXPECT_EQ(split_sentences("A b. C d."), (std::vector<std::string>{"A b.", "C d."}));
  EXPECT_EQ(split_sentences("See e.g. this. Done."), (std::vector<std::string>{"See e.g. this.", "Done."}));
  EXPECT_TRUE(split_sentences("").empty());
}

TEST(SplitSentences, GoldenParagraph) {
  const auto golden = read_json(fixture_path("sentences_golden.json"));
  const auto out = split_sentences(golden.at("text").get<std::string>());
  EXPECT_EQ(out, golden.at("sentences").get<std::vector<std::string>>());
  EXPECT_EQ(out.size(), 7u);
}

TEST(SplitSentences, NoEmptyAndRejoinIdempotent) {
  std::mt19937_64 gen(5);
  const std::vector<std::string> pieces{"Alpha", "beta.", "Gamma!", "e.g.", "Dr.", "7", "delta?", "  ", "x."};
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    for (int i = 0; i < 30; ++i) text += pieces[gen() % pieces.size()] + (gen() % 4 ? " " : "\n");
    const auto first = split_sentences(text);
    std::string joined;
    std::string squashed;
    for (const auto& s : first) {
      EXPECT_FALSE(s.empty());
      joined += (joined.empty() ? "" : " ") + s;
    }
    EXPECT_EQ(split_sentences(joined), first);
    for (const auto& s : first) squashed += s;
    std::string no_ws;
    for (char c : text) {
      if (!std::isspace(static_cast<unsigned char>(c))) no_ws += c;
    }
    std::string squashed_no_ws;
    for (char c : squashed) {
      if (!std::isspace(static_cast<unsigned char>(c))) squashed_no_ws += c;
    }
    EXPECT_EQ(squashed_no_ws, no_ws);
  }
}

TEST(CleanEli5, Trivial) {
  EXPECT_EQ(clean_eli5_question("Explain like I'm five: why is the sky blue?"), "why is the sky blue?");
  EXPECT_EQ(clean_eli5_question("Why is the sky blue?"), "Why is the sky blue?");
}

TEST(CleanEli5, GoldenQuestions) {
  for (const auto& item : read_json(fixture_path("eli5_questions.json"))) {
    EXPECT_EQ(clean_eli5_question(item.at("input").get<std::string>()), item.at("cleaned").get<std::string>())
        << item.at("input");
  }
}

TEST(Jsonl, RoundTripThreeRecords) {
  test::TempDir dir;
  DatasetSplit split{SplitName::Validation,
                     {{"a", "q1", "h1", {{"N/A", "g1"}}}, {"b", "q2", "h2", {}}, {"c", "q3", "h3", {{"X", "y"}}}}};
  save_jsonl(split, dir / "s.jsonl");
  EXPECT_EQ(load_jsonl(dir / "s.jsonl", SplitName::Validation), split);
}

TEST(Jsonl, MalformedLineReportsLine) {
  test::TempDir dir;
  std::ofstream(dir / "bad.jsonl") << R"({"id":"a","question":"q","human_answer":"h"})" << "\n{not json\n";
  try {
    load_jsonl(dir / "bad.jsonl");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Jsonl, MissingFileIsIo) {
  try {
    load_jsonl("/nonexistent/file.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Io);
    EXPECT_EQ(category(e.code()), ErrorCategory::Data);
  }
}

TEST(Jsonl, LargeFixtureKeepsOrder) {
  const auto split = load_jsonl(fixture_path("records_2000.jsonl"));
  ASSERT_EQ(split.records.size(), oracle_count("records_2000"));
  for (std::size_t i = 0; i < split.records.size(); ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "r%04zu", i);
    EXPECT_EQ(split.records[i].id, id);
  }
}

TEST(Jsonl, RandomizedRoundTrip) {
  std::mt19937_64 gen(11);
  const auto text = [&](std::size_t max_len) {
    std::string s;
    const std::size_t n = 1 + gen() % max_len;
    const std::vector<std::string> alphabet{"a", "b", " ", "\n", "\"", "\\", "\t", "\xC3\xA9", "z"};
    for (std::size_t i = 0; i < n; ++i) s += alphabet[gen() % alphabet.size()];
    return s;
  };
  test::TempDir dir;
  for (int trial = 0; trial < 20; ++trial) {
    DatasetSplit split;
    for (int i = 0; i < 15; ++i) {
      QARecord r{"id" + std::to_string(i), text(20), text(40), {}};
      for (std::size_t g = gen() % 3; g > 0; --g) r.generations[text(5)] = text(30);
      split.records.push_back(r);
    }
    save_jsonl(split, dir / "r.jsonl");
    EXPECT_EQ(load_jsonl(dir / "r.jsonl"), split);
  }
}

TEST(Splits, DisjointIds) {
  DatasetSplit tr{SplitName::Train, {{"a", "q", "h", {}}}};
  DatasetSplit val{SplitName::Validation, {{"a", "q", "h", {}}}};
  EXPECT_THROW(require_disjoint(tr, val), Error);
  val.records[0].id = "b";
  EXPECT_NO_THROW(require_disjoint(tr, val));
}

}  // namespace
}  // namespace failopt::corpus
