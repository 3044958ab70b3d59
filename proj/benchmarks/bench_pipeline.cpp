#include <benchmark/benchmark.h>

#include <memory>

#include "failopt/llm/gateway.hpp"
#include "failopt/llm/mock.hpp"
#include "failopt/llm/prompt.hpp"
#include "failopt/logging.hpp"
#include "failopt/opt/failopt.hpp"
#include "failopt/testbed/testbed.hpp"

namespace {

using namespace failopt;

llm::MockScenario scenario(const char* id) {
  return llm::load_scenario(std::string(FAILOPT_BENCH_SCENARIOS) + "/" + id + ".json");
}

void BM_MockGeneration(benchmark::State& state) {
  const auto s = scenario("S3");
  const llm::MockBackend backend(s);
  const auto prompt = llm::render_prompt({corpus::TaskTemplate::Eli5, "", llm::mock_question(s, 3), 300}, {});
  int i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(backend.complete(prompt, {1.0, 600, std::nullopt}, i++));
}

void BM_SynthCorpus(benchmark::State& state) {
  const auto s = scenario("S3");
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(testbed::synth_corpus(s, n));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

void BM_LinearTraining(benchmark::State& state) {
  const auto s = scenario("S1");
  const auto corpus = testbed::synth_corpus(s, static_cast<std::size_t>(state.range(0)));
  std::vector<detect::LabeledText> samples;
  for (const auto& r : corpus.records) {
    samples.push_back({r.human_answer, detect::Label::Human});
    samples.push_back({std::string(*r.base_generation()), detect::Label::AI});
  }
  detect::LinearHyper hyper;
  hyper.max_iters = 20;
  for (auto _ : state) benchmark::DoNotOptimize(detect::train_linear(samples, hyper));
}

void BM_E2EAttackS1(benchmark::State& state) {
  set_log_level("error");
  const auto s = scenario("S1");
  for (auto _ : state) benchmark::DoNotOptimize(testbed::run_e2e_attack(s, testbed::E2EConfig{}));
}

}  // namespace

BENCHMARK(BM_MockGeneration);
BENCHMARK(BM_SynthCorpus)->ArgNames({"records"})->Arg(100)->Arg(1000);
BENCHMARK(BM_LinearTraining)->ArgNames({"records"})->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_E2EAttackS1)->Unit(benchmark::kSecond)->Iterations(1);
