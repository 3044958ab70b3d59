#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "failopt/corpus/text.hpp"
#include "failopt/detect/linear.hpp"
#include "failopt/detect/lm.hpp"
#include "failopt/error.hpp"
#include "failopt/rng.hpp"
#include "failopt/eval/metrics.hpp"
#include "failopt/testbed/testbed.hpp"
#include "support.hpp"

namespace failopt::detect {
namespace {

using test::FnLM;
using test::FnPerturber;

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no failopt::Error thrown";
  return Errc::Config;
}

std::vector<double> per_token(const std::string& text, double lp) {
  return std::vector<double>(corpus::count_tokens(text), lp);
}

TEST(Perplexity, UniformEqualsVocabulary) {
  const UniformLM lm(50);
  EXPECT_DOUBLE_EQ(perplexity(lm, "a b c d e f g h i j"), 50.0);
}

TEST(Perplexity, CertainModelIsOne) {
  const FnLM lm([](const std::string& t) { return per_token(t, 0.0); });
  EXPECT_EQ(perplexity(lm, "a b c"), 1.0);
}

TEST(Perplexity, HandComputed) {
  const FnLM lm([](const std::string&) { return std::vector<double>{-1.0, -2.0, -3.0}; });
  EXPECT_NEAR(perplexity(lm, "x y z"), 7.38905609893065, 1e-12);
}

TEST(Perplexity, Errors) {
  const FnLM none([](const std::string&) { return std::vector<double>{}; });
  EXPECT_EQ(code_of([&] { perplexity(none, "x"); }), Errc::DegenerateText);
  const FnLM nan([](const std::string&) { return std::vector<double>{-1.0, std::nan("")}; });
  EXPECT_EQ(code_of([&] { perplexity(nan, "x y"); }), Errc::NonFinite);
}

TEST(Perplexity, AtLeastOneForProperProbabilities) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-8.0, 0.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> lps(1 + gen() % 40);
    for (auto& v : lps) v = u(gen);
    const FnLM lm([&](const std::string&) { return lps; });
    EXPECT_GE(perplexity(lm, "t"), 1.0);
  }
}

TEST(PerplexityDetectorTest, Orientation) {
  const FnLM lm([](const std::string& t) { return per_token(t, -std::log(12.0)); });
  const PerplexityDetector det(std::make_shared<FnLM>(lm));
  const auto s = det.score("a b c");
  EXPECT_NEAR(s.raw, 12.0, 1e-12);
  EXPECT_DOUBLE_EQ(s.ai_score, -s.raw);
  EXPECT_FALSE(det.probabilistic());
}

/// Originals score `base` per token; perturbed texts (marked "~k") score base - shift(k).
FnLM shifted_lm(double base, std::function<double(int)> shift) {
  return FnLM([base, shift](const std::string& t) {
    const auto mark = t.rfind(" ~");
    if (mark == std::string::npos) return per_token(t, base);
    return per_token(t.substr(0, mark), base - shift(std::stoi(t.substr(mark + 2))));
  });
}

const std::string kTen = "a b c d e f g h i j";

const FnPerturber kMarking([](const std::string& t, int i) { return t + " ~" + std::to_string(i); });

TEST(Discrepancy, ConstantShift) {
  PerturbationConfig cfg;
  const auto exact = shifted_lm(-1.0, [](int) { return 0.75; });
  EXPECT_EQ(perturbation_discrepancy(exact, kMarking, kTen, cfg, 1), 0.75);
  const auto decimal = shifted_lm(-1.0, [](int) { return 0.7; });
  EXPECT_NEAR(perturbation_discrepancy(decimal, kMarking, kTen, cfg, 1), 0.7, 1e-12);
}

TEST(Discrepancy, UnchangedIsZero) {
  const auto flat = shifted_lm(-2.0, [](int) { return 0.0; });
  EXPECT_EQ(perturbation_discrepancy(flat, kMarking, kTen, PerturbationConfig{}, 1), 0.0);
}

TEST(Discrepancy, ArithmeticMeanOfDeltas) {
  PerturbationConfig cfg;
  cfg.n_perturbations = 5;
  const std::vector<double> deltas{0.2, 0.4, 0.6, 0.8, 1.0};
  const auto lm = shifted_lm(-1.0, [&](int k) { return deltas[static_cast<std::size_t>(k)]; });
  EXPECT_NEAR(perturbation_discrepancy(lm, kMarking, kTen, cfg, 1), 0.6, 1e-12);
}

TEST(Discrepancy, MatchesBruteForce) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(-3.0, 0.0);
  for (int trial = 0; trial < 50; ++trial) {
    PerturbationConfig cfg;
    cfg.n_perturbations = 1 + static_cast<int>(gen() % 30);
    std::map<std::string, std::vector<double>> table;
    const std::string text = "w" + std::to_string(trial) + " " + kTen;
    table[text] = {u(gen), u(gen), u(gen)};
    std::vector<std::string> perturbed;
    for (int i = 0; i < cfg.n_perturbations; ++i) {
      perturbed.push_back(text + " ~" + std::to_string(i));
      table[perturbed.back()] = {u(gen), u(gen), u(gen), u(gen)};
    }
    const FnLM lm([&](const std::string& t) { return table.at(t); });
    const auto mean = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    double acc = 0;
    for (const auto& p : perturbed) acc += mean(table.at(p));
    const double oracle = mean(table.at(text)) - acc / static_cast<double>(perturbed.size());
    EXPECT_DOUBLE_EQ(perturbation_discrepancy(lm, kMarking, text, cfg, 1), oracle);
  }
}

TEST(Discrepancy, IdenticalPerturbationsFail) {
  const FnPerturber same([](const std::string& t, int) { return t; });
  const UniformLM lm(10);
  EXPECT_EQ(code_of([&] { perturbation_discrepancy(lm, same, kTen, PerturbationConfig{}, 1); }),
            Errc::PerturbationFailure);
}

TEST(Discrepancy, SpanPerturberIsSeeded) {
  const SpanPerturber sp({"fill1", "fill2", "fill3"});
  PerturbationConfig cfg;
  cfg.n_perturbations = 10;
  std::string text;
  for (int i = 0; i < 40; ++i) text += "tok" + std::to_string(i) + " ";
  const auto a = sp.perturb(text, cfg, 5);
  EXPECT_EQ(a, sp.perturb(text, cfg, 5));
  EXPECT_NE(a, sp.perturb(text, cfg, 6));
  ASSERT_EQ(a.size(), 10u);
  for (const auto& p : a) EXPECT_NE(p, text);
}

TEST(Classify, InclusiveBoundary) {
  EXPECT_EQ(classify(0.7, Threshold{0.5}), Label::AI);
  EXPECT_EQ(classify(0.5, Threshold{0.5}), Label::AI);
  EXPECT_EQ(classify(0.4999, Threshold{0.5}), Label::Human);
}

TEST(Classify, OrientationCoherence) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 1000; ++i) {
    const double s = u(gen), up = s + std::abs(u(gen)), tau = u(gen);
    if (classify(s, Threshold{tau}) == Label::AI) {
      EXPECT_EQ(classify(up, Threshold{tau}), Label::AI);
    }
  }
}

TEST(Featurize, SortedSignedEntries) {
  const auto f = featurize("the quick brown fox", 3, 4, 1 << 12);
  ASSERT_FALSE(f.entries.empty());
  for (std::size_t i = 0; i < f.entries.size(); ++i) {
    EXPECT_NE(f.entries[i], 0);
    EXPECT_LE(std::abs(f.entries[i]), 1 << 12);
    if (i > 0) {
      EXPECT_LT(std::abs(f.entries[i - 1]), std::abs(f.entries[i]));
    }
  }
}

std::vector<LabeledText> marker_toy(std::size_t n) {
  const auto s = test::scenario("S1");
  std::vector<LabeledText> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = llm::mock_question(s, i);
    out.push_back({llm::mock_human_answer(s, q), Label::Human});
    out.push_back({llm::mock_human_answer(s, q + " ai") + " [M1]", Label::AI});
  }
  return out;
}

LinearHyper small_hyper() {
  LinearHyper h;
  h.dim_log2 = 14;
  h.max_iters = 60;
  return h;
}

TEST(Linear, SeparableToyFitsExactly) {
  const auto data = marker_toy(30);
  TrainingReport report;
  const auto model = train_linear(data, small_hyper(), &report);
  for (const auto& d : data) {
    EXPECT_EQ(model.predict(d.text) >= 0.5 ? Label::AI : Label::Human, d.label);
  }
  for (std::size_t i = 1; i < report.loss_history.size(); ++i) {
    EXPECT_LE(report.loss_history[i], report.loss_history[i - 1]);
  }
  EXPECT_GT(report.steps_accepted, 0);
}

TEST(Linear, DeterministicWeights) {
  const auto data = marker_toy(15);
  const auto a = train_linear(data, small_hyper());
  const auto b = train_linear(data, small_hyper());
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.bias, b.bias);
}

TEST(Linear, DegenerateData) {
  auto data = marker_toy(15);
  std::erase_if(data, [](const LabeledText& t) { return t.label == Label::AI; });
  EXPECT_EQ(code_of([&] { train_linear(data, small_hyper()); }), Errc::DegenerateData);
  auto few = marker_toy(9);
  EXPECT_EQ(code_of([&] { train_linear(few, small_hyper()); }), Errc::DegenerateData);
}

TEST(Linear, SaveLoadAndVersion) {
  test::TempDir dir;
  const auto model = train_linear(marker_toy(12), small_hyper());
  save_model(model, dir / "m.json");
  const auto back = load_model(dir / "m.json");
  EXPECT_EQ(back.weights, model.weights);
  EXPECT_EQ(back.bias, model.bias);
  EXPECT_EQ(back.n_lo, model.n_lo);
  auto j = test::read_json(dir / "m.json");
  j["version"] = LinearNgramModel::kFormatVersion + 1;
  std::ofstream(dir / "m2.json") << j.dump();
  EXPECT_EQ(code_of([&] { load_model(dir / "m2.json"); }), Errc::VersionMismatch);
}

TEST(Linear, WarmStartNeedsMatchingFeatures) {
  const auto base = train_linear(marker_toy(12), small_hyper());
  auto h = small_hyper();
  h.dim_log2 = 13;
  std::vector<FeatureVector> xs;
  std::vector<std::uint8_t> ys;
  for (const auto& d : marker_toy(12)) {
    xs.push_back(featurize(d.text, h.n_lo, h.n_hi, std::size_t{1} << h.dim_log2));
    ys.push_back(d.label == Label::AI);
  }
  std::vector<const FeatureVector*> ptrs;
  for (const auto& x : xs) ptrs.push_back(&x);
  EXPECT_EQ(code_of([&] { train_linear_features(ptrs, ys, h, nullptr, &base); }), Errc::Config);
}

struct HeldOut {
  std::vector<LabeledText> train;
  std::vector<corpus::QARecord> test;
};

HeldOut testbed_split() {
  const auto corpus = testbed::synth_corpus(test::scenario("S1"), 400);
  HeldOut h;
  for (std::size_t i = 0; i < 200; ++i) {
    const auto& r = corpus.records[i];
    h.train.push_back({r.human_answer, Label::Human});
    h.train.push_back({std::string(*r.base_generation()), Label::AI});
  }
  h.test.assign(corpus.records.begin() + 200, corpus.records.end());
  return h;
}

double held_out_auroc(const LinearNgramModel& model, const std::vector<corpus::QARecord>& test) {
  std::vector<double> human, ai;
  for (const auto& r : test) {
    human.push_back(model.predict(r.human_answer));
    ai.push_back(model.predict(*r.base_generation()));
  }
  return eval::auroc(human, ai);
}

TEST(Linear, TestbedHeldOutAuroc) {
  const auto split = testbed_split();
  const auto model = train_linear(split.train, LinearHyper{});
  EXPECT_GE(held_out_auroc(model, split.test), 0.95);
}

TEST(Linear, ShuffledLabelsCarryNoSignal) {
  const auto split = testbed_split();
  auto h = LinearHyper{};
  h.max_iters = 60;
  h.dim_log2 = 14;
  const std::size_t dim = std::size_t{1} << h.dim_log2;
  std::vector<FeatureVector> xs;
  std::vector<std::uint8_t> labels;
  for (const auto& t : split.train) {
    xs.push_back(featurize(t.text, h.n_lo, h.n_hi, dim));
    labels.push_back(t.label == Label::AI);
  }
  std::vector<const FeatureVector*> ptrs;
  for (const auto& x : xs) ptrs.push_back(&x);
  std::vector<FeatureVector> test_human, test_ai;
  for (const auto& r : split.test) {
    test_human.push_back(featurize(r.human_answer, h.n_lo, h.n_hi, dim));
    test_ai.push_back(featurize(*r.base_generation(), h.n_lo, h.n_hi, dim));
  }
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto shuffled = labels;
    failopt::Rng rng(seed);
    rng.shuffle(shuffled);
    const auto model = train_linear_features(ptrs, shuffled, h);
    std::vector<double> human, ai;
    for (const auto& x : test_human) human.push_back(model.logit(x));
    for (const auto& x : test_ai) ai.push_back(model.logit(x));
    const double a = eval::auroc(human, ai);
    EXPECT_GE(a, 0.4) << "seed " << seed;
    EXPECT_LE(a, 0.6) << "seed " << seed;
    total += a;
  }
  EXPECT_NEAR(total / 20.0, 0.5, 0.05);
}

}  // namespace
}  // namespace failopt::detect
