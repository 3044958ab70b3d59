#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "failopt/eval/metrics.hpp"

namespace {

using failopt::detect::Label;

std::vector<double> uniform_scores(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

void BM_Auroc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto human = uniform_scores(n, 1);
  const auto ai = uniform_scores(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(failopt::eval::auroc(human, ai));
  state.SetComplexityN(state.range(0));
}

void BM_BestF1Threshold(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto scores = uniform_scores(n, 3);
  std::vector<Label> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % 2 ? Label::AI : Label::Human;
  for (auto _ : state) benchmark::DoNotOptimize(failopt::eval::best_f1_threshold(scores, labels));
  state.SetComplexityN(state.range(0));
}

}  // namespace

BENCHMARK(BM_Auroc)->ArgNames({"n"})->RangeMultiplier(4)->Range(64, 1 << 16)->Complexity();
BENCHMARK(BM_BestF1Threshold)->ArgNames({"n"})->RangeMultiplier(4)->Range(64, 1 << 16)->Complexity();
