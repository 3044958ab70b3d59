#include <gtest/gtest.h>

#include <map>
#include <regex>

#include "failopt/error.hpp"
#include "failopt/llm/gateway.hpp"
#include "failopt/llm/mock.hpp"
#include "failopt/testbed/testbed.hpp"
#include "support.hpp"

namespace failopt::augment {
namespace {

using detect::Label;

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no failopt::Error thrown";
  return Errc::Config;
}

/// Sentences of mock text: one more than the number of terminators followed
/// by whitespace and an uppercase letter or digit (mock text has no abbreviations).
std::size_t count_sentences(const std::string& text) {
  static const std::regex kBoundary(R"([.!?]\s+[A-Z0-9])");
  return 1 + static_cast<std::size_t>(
                 std::distance(std::sregex_iterator(text.begin(), text.end(), kBoundary), std::sregex_iterator()));
}

/// Records every training subset and hands back a fixed detector.
class SpyTrainer final : public DetectorTrainer {
 public:
  std::string id() const override { return "spy"; }
  void prepare(std::span<const TrainingSample> pool) override { pool_.assign(pool.begin(), pool.end()); }
  std::shared_ptr<const detect::Detector> train(std::span<const std::size_t> idx, std::uint64_t seed,
                                                double scale) override {
    calls.push_back({{idx.begin(), idx.end()}, seed, scale});
    return detector_;
  }
  std::shared_ptr<const detect::Detector> untrained() const override { return detector_; }

  struct Call {
    std::vector<std::size_t> idx;
    std::uint64_t seed;
    double scale;
  };
  std::vector<Call> calls;
  const std::vector<TrainingSample>& pool() const { return pool_; }

 private:
  std::vector<TrainingSample> pool_;
  std::shared_ptr<const detect::Detector> detector_ = std::make_shared<test::MarkerDetector>();
};

struct S1Plan : ::testing::Test {
  static void SetUpTestSuite() {
    s = test::scenario("S1");
    base = {corpus::SplitName::Train, testbed::synth_corpus(s, 50, 5000).records};
    llm::Gateway gw(std::make_shared<llm::MockBackend>(s));
    samples = build_augmented_dataset(plan(), gw, base);
  }
  static AugmentationPlan plan() {
    AugmentationPlan p;
    for (const auto& r : base.records) p.questions.push_back(r.id);
    p.failopt_instructions = llm::InstructionList({s.markers[0].suppression_instruction});
    p.size_sweep = {10, 20};
    p.n_seeds = 2;
    return p;
  }
  static EvalSuite suite() {
    EvalSuite e;
    e.records = testbed::synth_corpus(s, 30, 9000).records;
    llm::Gateway gw(std::make_shared<llm::MockBackend>(s));
    testbed::attach_instruction_attack(e.records, gw, "FAILOpt", plan().failopt_instructions,
                                       corpus::TaskSpec{});
    e.attacks = {"N/A", "FAILOpt"};
    e.task = "synthetic";
    return e;
  }
  static inline llm::MockScenario s;
  static inline corpus::DatasetSplit base;
  static inline std::vector<TrainingSample> samples;
};

TEST(DefaultList, Verbatim) {
  const auto l = default_failopt_instructions();
  ASSERT_EQ(l.size(), 4u);
  EXPECT_EQ(l.items()[0], "Incorporate witty remarks and irony to convey your message in your responses.");
  for (const auto& i : l.items()) {
    EXPECT_EQ(i.find("G1"), std::string::npos);
    EXPECT_EQ(i.find("G2"), std::string::npos);
  }
}

TEST(Arms, SourcesAndNames) {
  EXPECT_EQ(arm_sources(Arm::Full), (std::set<Source>{Source::Human, Source::BaseAIGT, Source::FailoptAIGT}));
  EXPECT_EQ(arm_sources(Arm::MinusBase), (std::set<Source>{Source::Human, Source::FailoptAIGT}));
  EXPECT_EQ(arm_sources(Arm::MinusFailopt), (std::set<Source>{Source::Human, Source::BaseAIGT}));
  for (auto a : {Arm::NoTrain, Arm::Full, Arm::MinusBase, Arm::MinusFailopt}) EXPECT_EQ(parse_arm(to_string(a)), a);
  EXPECT_EQ(code_of([] { parse_arm("Half"); }), Errc::Config);
}

TEST(Plan, Validation) {
  AugmentationPlan p;
  p.failopt_instructions = default_failopt_instructions();
  EXPECT_NO_THROW(p.validate());
  auto q = p;
  q.sources = {Source::BaseAIGT, Source::FailoptAIGT};
  EXPECT_EQ(code_of([&] { q.validate(); }), Errc::Config);
  q = p;
  q.sources = {Source::Human};
  EXPECT_EQ(code_of([&] { q.validate(); }), Errc::Config);
  q = p;
  q.failopt_instructions = {};
  EXPECT_EQ(code_of([&] { q.validate(); }), Errc::Config);
  q = p;
  q.questions = {"a"};
  q.excluded_ids = {"a"};
  EXPECT_EQ(code_of([&] { q.validate(); }), Errc::Config);
}

TEST(Build, Cardinalities) {
  const auto s = test::scenario("S1");
  const corpus::DatasetSplit base{corpus::SplitName::Train, testbed::synth_corpus(s, 2).records};
  llm::Gateway gw(std::make_shared<llm::MockBackend>(s));
  AugmentationPlan p;
  p.questions = {base.records[0].id, base.records[1].id};
  p.failopt_instructions = default_failopt_instructions();
  p.sentence_expand = false;
  EXPECT_EQ(build_augmented_dataset(p, gw, base).size(), 6u);
  p.sources = {Source::Human, Source::FailoptAIGT};
  const auto out = build_augmented_dataset(p, gw, base);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[0].source, Source::Human);
  EXPECT_EQ(out[1].source, Source::FailoptAIGT);
  EXPECT_EQ(out[2].question_id, base.records[1].id);
}

TEST(Build, MissingHumanAnswer) {
  const auto s = test::scenario("S1");
  corpus::DatasetSplit base{corpus::SplitName::Train, testbed::synth_corpus(s, 1).records};
  llm::Gateway gw(std::make_shared<llm::MockBackend>(s));
  AugmentationPlan p;
  p.failopt_instructions = default_failopt_instructions();
  p.questions = {"nowhere"};
  EXPECT_EQ(code_of([&] { build_augmented_dataset(p, gw, base); }), Errc::MissingHumanAnswer);
  base.records[0].human_answer.clear();
  p.questions = {base.records[0].id};
  EXPECT_EQ(code_of([&] { build_augmented_dataset(p, gw, base); }), Errc::MissingHumanAnswer);
}

TEST(Build, RefusedGenerationsAreDropped) {
  const auto s = test::scenario("S1");
  corpus::DatasetSplit base{corpus::SplitName::Train, {{"q3", "Q3", "A human answer. It has two sentences.", {}}}};
  llm::Gateway gw(std::make_shared<llm::MockBackend>(s));
  AugmentationPlan p;
  p.failopt_instructions = default_failopt_instructions();
  p.questions = {"q3"};
  const auto out = build_augmented_dataset(p, gw, base);
  ASSERT_EQ(out.size(), 3u);
  for (const auto& x : out) EXPECT_EQ(x.source, Source::Human);
}

TEST_F(S1Plan, MarkersFollowSource) {
  std::size_t base_full = 0, failopt_full = 0;
  for (const auto& x : samples) {
    if (x.granularity != Granularity::FullAnswer) continue;
    if (x.source == Source::BaseAIGT) {
      ++base_full;
      EXPECT_NE(x.text.find("[M1]"), std::string::npos);
    }
    if (x.source == Source::FailoptAIGT) {
      ++failopt_full;
      EXPECT_EQ(x.text.find("[M1]"), std::string::npos);
    }
  }
  EXPECT_EQ(base_full, 50u);
  EXPECT_EQ(failopt_full, 50u);
}

TEST_F(S1Plan, LabelsFollowSource) {
  for (const auto& x : samples) EXPECT_EQ(x.label, x.source == Source::Human ? Label::Human : Label::AI);
}

TEST_F(S1Plan, SampleCountMatchesRecount) {
  llm::Gateway gw(std::make_shared<llm::MockBackend>(s));
  const corpus::TaskSpec task{};
  std::size_t expected = 0;
  for (const auto& r : base.records) {
    auto t = task;
    t.instance = r.question;
    const std::vector<std::string> texts{
        r.human_answer, gw.generate(llm::render_prompt(t, {}), {1.0, 600, std::nullopt}),
        gw.generate(llm::render_prompt(t, plan().failopt_instructions), {1.0, 600, std::nullopt})};
    for (const auto& x : texts) expected += 1 + count_sentences(x);
  }
  EXPECT_EQ(samples.size(), expected);
}

TEST_F(S1Plan, JsonRoundTrip) {
  test::TempDir dir;
  save_samples_jsonl(std::span(samples).first(20), dir / "s.jsonl");
  std::ifstream in(dir / "s.jsonl");
  std::string line;
  std::size_t i = 0;
  while (std::getline(in, line)) EXPECT_EQ(nlohmann::json::parse(line).get<TrainingSample>(), samples[i++]);
  EXPECT_EQ(i, 20u);
}

TEST_F(S1Plan, ArmsTrainOnTheirSourcesWithEqualCounts) {
  SpyTrainer spy;
  const auto p = plan();
  const auto result = run_ablation(p, samples, spy, suite());
  EXPECT_TRUE(result.failures.empty());
  // NoTrain once, then each trained arm over two sizes and two seeds.
  ASSERT_EQ(spy.calls.size(), 3u * 2u * 2u);
  std::size_t call = 0;
  for (auto arm : {Arm::Full, Arm::MinusBase, Arm::MinusFailopt}) {
    for (std::size_t size : p.size_sweep) {
      for (std::size_t seed = 0; seed < 2; ++seed) {
        const auto& c = spy.calls[call++];
        EXPECT_DOUBLE_EQ(c.scale, static_cast<double>(size) / 10.0);
        std::map<Source, std::size_t> full;
        std::set<std::string> questions;
        for (auto i : c.idx) {
          const auto& x = spy.pool()[i];
          EXPECT_TRUE(arm_sources(arm).contains(x.source));
          if (x.granularity == Granularity::FullAnswer) ++full[x.source];
          questions.insert(x.question_id);
        }
        EXPECT_EQ(questions.size(), size);
        EXPECT_EQ(full.size(), arm_sources(arm).size());
        for (const auto& [src, n] : full) EXPECT_EQ(n, size) << to_string(src);
      }
    }
  }
  EXPECT_NE(spy.calls[0].idx, spy.calls[1].idx);
}

TEST_F(S1Plan, MultiSeedArmsOnly) {
  SpyTrainer spy;
  auto p = plan();
  p.multi_seed_arms = {Arm::Full};
  const auto result = run_ablation(p, samples, spy, suite());
  EXPECT_EQ(spy.calls.size(), 2u * 2u + 2u + 2u);
  EXPECT_EQ(result.rows.size(), (1 + spy.calls.size()) * 2);
}

TEST_F(S1Plan, NoTrainRowIsTheUntouchedDetector) {
  SpyTrainer spy;
  const auto st = suite();
  const auto result = run_ablation(plan(), samples, spy, st);
  ASSERT_GE(result.rows.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& row = result.rows[i];
    EXPECT_EQ(row.arm, Arm::NoTrain);
    const auto direct = eval::evaluate_attack(*spy.untrained(), st.records, st.attacks[i], st.task,
                                              st.tau_policy, st.config);
    EXPECT_EQ(nlohmann::json(row.report), nlohmann::json(direct));
  }
}

TEST_F(S1Plan, OversizedPointIsRecordedAndOthersContinue) {
  SpyTrainer spy;
  auto p = plan();
  p.size_sweep = {10, 500};
  p.n_seeds = 1;
  const auto result = run_ablation(p, samples, spy, suite());
  EXPECT_EQ(result.failures.size(), 3u);
  for (const auto& f : result.failures) EXPECT_EQ(f.size, 500u);
  EXPECT_EQ(result.rows.size(), (1 + 3) * 2u);
}

TEST_F(S1Plan, CsvHeadersAndTrajectory) {
  SpyTrainer spy;
  const auto result = run_ablation(plan(), samples, spy, suite());
  const auto csv = ablation_csv(result);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "arm,size,seed,detector,attack,task,auroc,asr,mean_human_score");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), result.rows.size() + 1);
  const auto traj = human_score_trajectory(result);
  ASSERT_EQ(traj.size(), 3u * 2u * 2u);
  for (const auto& t : traj) {
    EXPECT_EQ(t.n_seeds, 2u);
    if (t.size == 10) {
      EXPECT_EQ(t.ratio, 1.0);
    }
  }
  const auto tcsv = trajectory_csv(traj);
  EXPECT_EQ(tcsv.substr(0, tcsv.find('\n')), "arm,attack,size,n_seeds,median_human_score,ratio_to_smallest");
}

}  // namespace
}  // namespace failopt::augment
