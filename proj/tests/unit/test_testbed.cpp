#include <gtest/gtest.h>

#include <algorithm>

#include "failopt/error.hpp"
#include "failopt/net.hpp"
#include "failopt/testbed/testbed.hpp"
#include "support.hpp"

namespace failopt::testbed {
namespace {

AttackOutcome attack(const std::string& id, std::uint64_t seed, std::size_t k = 2) {
  auto s = test::scenario(id);
  s.seed = seed;
  E2EConfig cfg;
  cfg.failopt.seed = seed;
  cfg.failopt.k = k;
  return run_e2e_attack(s, cfg);
}

const nlohmann::json& pilot_entry(const nlohmann::json& golden, const char* key, std::uint64_t seed) {
  for (const auto& p : golden.at(key)) {
    if (p.at("seed") == seed) return p;
  }
  throw std::runtime_error("no pilot entry for the seed");
}

TEST(SynthCorpus, FullRatePlantsEveryRecord) {
  const auto c = synth_corpus(test::scenario("S1"), 50);
  ASSERT_EQ(c.records.size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_TRUE(c.generation_log[i][0]);
    EXPECT_NE(c.records[i].base_generation()->find("[M1]"), std::string::npos);
    EXPECT_EQ(c.records[i].human_answer.find("[M1]"), std::string::npos);
  }
}

TEST(SynthCorpus, HalfRateLandsInBand) {
  auto s = test::scenario("S1");
  s.markers[0].insert_rate = 0.5;
  const auto c = synth_corpus(s, 400);
  std::size_t planted = 0;
  for (std::size_t i = 0; i < 400; ++i) {
    const bool has = c.records[i].base_generation()->find("[M1]") != std::string::npos;
    EXPECT_EQ(has, c.generation_log[i][0]);
    planted += has;
  }
  EXPECT_GE(planted, 160u);
  EXPECT_LE(planted, 240u);
}

TEST(SynthCorpus, DeterministicAndWindowed) {
  const auto s = test::scenario("S3");
  const auto a = synth_corpus(s, 30, 10);
  const auto b = synth_corpus(s, 30, 10);
  EXPECT_EQ(a.records, b.records);
  const auto wide = synth_corpus(s, 40, 0);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(a.records[i], wide.records[i + 10]);
  std::set<std::string> ids;
  for (const auto& r : wide.records) ids.insert(r.id);
  EXPECT_EQ(ids.size(), 40u);
}

TEST(Attach, RefusalsLeaveAttackAbsent) {
  const auto s = test::scenario("S1");
  llm::Gateway gw(std::make_shared<llm::MockBackend>(s));
  std::vector<corpus::QARecord> recs{{"a", "Q3", "h", {}}, synth_corpus(s, 1).records[0]};
  attach_instruction_attack(recs, gw, "X", llm::InstructionList({"Be brief."}), corpus::TaskSpec{});
  EXPECT_FALSE(recs[0].generation("X"));
  EXPECT_TRUE(recs[1].generation("X"));
  attach_paraphrase_attack(recs, gw);
  EXPECT_TRUE(recs[1].generation(kParaAttack));
}

class Golden : public ::testing::TestWithParam<std::string> {};

TEST_P(Golden, PinnedSeedReproducesPilot) {
  const auto id = GetParam();
  const auto golden = test::read_json(test::golden_path(id));
  const auto seed = golden.at("pinned_seed").get<std::uint64_t>();
  const auto& want = pilot_entry(golden, "pilot", seed);
  const auto net_before = net::call_count();
  const auto out = attack(id, seed);
  EXPECT_EQ(net::call_count(), net_before);
  EXPECT_EQ(out.network_calls, 0u);
  EXPECT_EQ(out.failopt.final_list.items(), want.at("final_list").get<std::vector<std::string>>());
  EXPECT_NEAR(out.base_report.auroc, want.at("base_auroc").get<double>(), 1e-9);
  EXPECT_NEAR(out.attacked_report.auroc, want.at("attacked_auroc").get<double>(), 1e-9);
  EXPECT_NEAR(out.failopt.final_rate, want.at("final_rate").get<double>(), 1e-9);
  EXPECT_NEAR(out.failopt.baseline_rate, want.at("baseline_rate").get<double>(), 1e-9);
}

INSTANTIATE_TEST_SUITE_P(Scenarios, Golden, ::testing::Values("S0", "S1", "S3"));

TEST(Attack, S1MeetsThresholds) {
  const auto golden = test::read_json(test::golden_path("S1"));
  const auto& th = golden.at("thresholds");
  const auto out = attack("S1", 18);
  EXPECT_GE(out.base_report.auroc, th.at("min_base_auroc").get<double>());
  EXPECT_LE(out.attacked_report.auroc, th.at("max_attacked_auroc").get<double>());
  ASSERT_TRUE(out.attacked_report.asr);
  EXPECT_GE(*out.attacked_report.asr, th.at("min_asr").get<double>());
  EXPECT_LE(out.failopt.final_rate, th.at("max_final_rate").get<double>());
  EXPECT_GE(out.failopt.baseline_rate, th.at("min_baseline_rate").get<double>());
  EXPECT_TRUE(out.failopt.final_list.contains(test::scenario("S1").markers[0].suppression_instruction));
  const auto ids = out.detector_train_ids;
  for (const auto& r : out.test_records) EXPECT_EQ(std::count(ids.begin(), ids.end(), r.id), 0);
}

TEST(Attack, NegativeControl) {
  const auto golden = test::read_json(test::golden_path("S0"));
  const auto& th = golden.at("thresholds");
  const auto out = attack("S0", 19);
  EXPECT_LE(std::abs(out.base_report.auroc - out.attacked_report.auroc), th.at("max_auroc_gap").get<double>());
  EXPECT_LE(std::abs(out.failopt.final_rate - out.failopt.baseline_rate), th.at("max_rate_gap").get<double>());
  const auto band = th.at("base_auroc_band").get<std::vector<double>>();
  EXPECT_GE(out.base_report.auroc, band[0]);
  EXPECT_LE(out.base_report.auroc, band[1]);
}

TEST(Attack, WiderBeamIsNoWorse) {
  const auto k2 = attack("S3", 17, 2);
  const auto k1 = attack("S3", 17, 1);
  EXPECT_LE(k2.failopt.final_rate, k1.failopt.final_rate);
  const auto golden = test::read_json(test::golden_path("S3"));
  EXPECT_NEAR(k1.failopt.final_rate, pilot_entry(golden, "pilot_k1", 17).at("final_rate").get<double>(), 1e-9);
  EXPECT_GE(k2.failopt.final_list.size(), golden.at("thresholds").at("min_final_list_size").get<std::size_t>());
}

TEST(Defense, AblationOrdering) {
  const auto s = test::scenario("S1");
  E2EConfig cfg;
  augment::AugmentationPlan plan;
  plan.size_sweep = {100, 200};
  plan.n_seeds = 1;
  plan.multi_seed_arms = {};
  RetrainConfig retrain;
  retrain.hyper.max_iters = 20;
  retrain.scale_steps = true;
  const auto out = run_e2e_defense(s, cfg, plan, retrain);
  EXPECT_TRUE(out.grid.failures.empty());

  const auto auroc_of = [&](augment::Arm arm, std::size_t size, const std::string& attack_name) {
    for (const auto& row : out.grid.rows) {
      if (row.arm == arm && row.size == size && row.report.attack_name == attack_name) return row.report.auroc;
    }
    ADD_FAILURE() << "missing row";
    return -1.0;
  };
  const std::string na(corpus::kBaseGeneration);
  const std::string fo(kFailoptAttack);
  EXPECT_EQ(auroc_of(augment::Arm::NoTrain, 0, na), out.attack.base_report.auroc);
  EXPECT_EQ(auroc_of(augment::Arm::NoTrain, 0, fo), out.attack.attacked_report.auroc);
  EXPECT_GT(auroc_of(augment::Arm::Full, 200, fo), auroc_of(augment::Arm::NoTrain, 0, fo) + 0.3);
  EXPECT_GT(auroc_of(augment::Arm::Full, 200, fo), auroc_of(augment::Arm::MinusFailopt, 200, fo) + 0.2);
  EXPECT_LT(auroc_of(augment::Arm::MinusBase, 200, na), auroc_of(augment::Arm::Full, 200, na));
  // Full answers and sentences of three sources per question.
  EXPECT_GT(out.samples.size(), 3u * 200u);
}

}  // namespace
}  // namespace failopt::testbed
