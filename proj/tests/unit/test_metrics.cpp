#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "failopt/error.hpp"
#include "failopt/eval/metrics.hpp"
#include "oracles.hpp"

namespace failopt::eval {
namespace {

using detect::Label;
namespace oracle = test::oracle;

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no failopt::Error thrown";
  return Errc::Config;
}

std::vector<double> draw(std::mt19937_64& gen, std::size_t n, bool coarse) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = coarse ? std::round(u(gen) * 10) / 10 : u(gen);
  return v;
}

TEST(Auroc, Examples) {
  EXPECT_EQ(auroc(std::vector<double>{0, 0}, std::vector<double>{1, 1}), 1.0);
  EXPECT_EQ(auroc(std::vector<double>{0.3, 0.3}, std::vector<double>{0.3, 0.3}), 0.5);
  EXPECT_EQ(auroc(std::vector<double>{0.5, 0.1}, std::vector<double>{0.9, 0.3}), 0.75);
  EXPECT_EQ(code_of([] { auroc(std::vector<double>{}, std::vector<double>{1}); }), Errc::EmptyClass);
}

TEST(Auroc, MatchesPairCount) {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 100; ++trial) {
    const bool coarse = trial % 2 == 0;
    const auto h = draw(gen, 1 + gen() % 200, coarse);
    const auto a = draw(gen, 1 + gen() % 200, coarse);
    EXPECT_NEAR(auroc(h, a), oracle::auroc_pairs(h, a), 1e-12);
  }
}

TEST(Auroc, MonotoneTransformInvariant) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto h = draw(gen, 50, trial % 2);
    const auto a = draw(gen, 60, trial % 2);
    const double k = 1.0 + static_cast<double>(gen() % 5);
    const auto f = [&](double x) { return std::exp(k * x) + x * x * x; };
    std::vector<double> th, ta;
    for (double x : h) th.push_back(f(x));
    for (double x : a) ta.push_back(f(x));
    EXPECT_DOUBLE_EQ(auroc(h, a), auroc(th, ta));
  }
}

TEST(Auroc, SwapComplements) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto h = draw(gen, 40, false);
    const auto a = draw(gen, 70, false);
    EXPECT_NEAR(auroc(h, a) + auroc(a, h), 1.0, 1e-12);
  }
}

TEST(Asr, Examples) {
  const std::vector<Label> base{Label::AI, Label::AI, Label::AI, Label::Human};
  const std::vector<Label> att{Label::Human, Label::AI, Label::Human, Label::Human};
  EXPECT_DOUBLE_EQ(*asr(base, att), 2.0 / 3.0);
  const std::vector<Label> humans(4, Label::Human);
  EXPECT_FALSE(asr(humans, att));
  const std::vector<Label> shorter(3, Label::AI);
  EXPECT_EQ(code_of([&] { asr(base, shorter); }), Errc::LengthMismatch);
}

TEST(Asr, MatchesRecountAndPermutation) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + gen() % 200;
    std::vector<Label> b(n), a(n);
    for (std::size_t i = 0; i < n; ++i) {
      b[i] = gen() % 3 ? Label::AI : Label::Human;
      a[i] = gen() % 2 ? Label::AI : Label::Human;
    }
    const auto got = asr(b, a);
    const auto want = oracle::asr_recount(b, a);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (!got) continue;
    EXPECT_EQ(*got, *want);
    EXPECT_GE(*got, 0.0);
    EXPECT_LE(*got, 1.0);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<Label> pb, pa;
    for (auto i : perm) {
      pb.push_back(b[i]);
      pa.push_back(a[i]);
    }
    EXPECT_EQ(*asr(pb, pa), *got);
  }
}

TEST(BestF1, Separable) {
  const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
  const std::vector<Label> l{Label::Human, Label::Human, Label::AI, Label::AI};
  const auto r = best_f1_threshold(s, l);
  EXPECT_DOUBLE_EQ(r.threshold.tau, 0.5);
  EXPECT_EQ(r.f1, 1.0);
  EXPECT_EQ(r.threshold.source, detect::ThresholdSource::BestF1Calibrated);
}

TEST(BestF1, InvertedPicksClassifyAll) {
  const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
  const std::vector<Label> l{Label::AI, Label::AI, Label::Human, Label::Human};
  const auto r = best_f1_threshold(s, l);
  EXPECT_EQ(r.threshold.tau, -std::numeric_limits<double>::infinity());
  EXPECT_DOUBLE_EQ(r.f1, 2.0 / 3.0);
}

TEST(BestF1, MatchesSweep) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + gen() % 60;
    const auto s = draw(gen, n, trial % 2);
    std::vector<Label> l(n);
    for (auto& x : l) x = gen() % 2 ? Label::AI : Label::Human;
    l[0] = Label::AI;
    l[1] = Label::Human;
    const auto r = best_f1_threshold(s, l);
    EXPECT_EQ(r.f1, oracle::best_f1_sweep(s, l));
    EXPECT_EQ(f1_at(s, l, r.threshold.tau), r.f1);
  }
}

TEST(BestF1, TiesTowardLargerTau) {
  // tau 0.15 and tau 0.5 both give F1 = 2/3 ... only the larger may be returned.
  const std::vector<double> s{0.1, 0.2, 0.8};
  const std::vector<Label> l{Label::Human, Label::AI, Label::Human};
  const auto r = best_f1_threshold(s, l);
  EXPECT_EQ(r.f1, oracle::best_f1_sweep(s, l));
  for (double t : {-std::numeric_limits<double>::infinity(), 0.15}) {
    if (f1_at(s, l, t) == r.f1) {
      EXPECT_GT(r.threshold.tau, t);
    }
  }
}

TEST(BestF1, NeedsBothLabels) {
  const std::vector<double> s{0.1, 0.2};
  const std::vector<Label> l{Label::AI, Label::AI};
  EXPECT_EQ(code_of([&] { best_f1_threshold(s, l); }), Errc::DegenerateData);
}

TEST(HumanScore, Affine) {
  EXPECT_EQ(human_score(0.0), 1.0);
  EXPECT_EQ(human_score(1.0), 0.0);
  EXPECT_DOUBLE_EQ(human_score(0.37), 0.63);
  EXPECT_EQ(code_of([] { human_score(1.5); }), Errc::OutOfRange);
  EXPECT_EQ(code_of([] { human_score(-12.0); }), Errc::OutOfRange);
}

TEST(Threshold, JsonSentinels) {
  EXPECT_EQ(threshold_to_json(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(threshold_from_json("inf"), std::numeric_limits<double>::infinity());
  EXPECT_EQ(threshold_from_json(threshold_to_json(0.25)), 0.25);
  const nlohmann::json p = TauPolicy::best_f1_on_base();
  EXPECT_EQ(p.get<TauPolicy>().kind, TauPolicy::Kind::BestF1OnBase);
}

}  // namespace
}  // namespace failopt::eval
