#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "failopt/corpus/text.hpp"
#include "failopt/detect/linear.hpp"

namespace {

std::string words(std::size_t n) {
  static const char* kWords[] = {"sky", "light", "Blue", "water.", "heat", "cold", "River", "stone,", "cloud"};
  std::mt19937_64 rng(7);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += kWords[rng() % 9];
  }
  return out;
}

void BM_CountTokens(benchmark::State& state) {
  const auto text = words(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(failopt::corpus::count_tokens(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}

void BM_SplitSentences(benchmark::State& state) {
  const auto text = words(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(failopt::corpus::split_sentences(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}

void BM_Featurize(benchmark::State& state) {
  const auto text = words(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(failopt::detect::featurize(text, 3, 4, std::size_t{1} << 18));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}

}  // namespace

BENCHMARK(BM_CountTokens)->ArgNames({"tokens"})->Arg(300)->Arg(3000);
BENCHMARK(BM_SplitSentences)->ArgNames({"tokens"})->Arg(300)->Arg(3000);
BENCHMARK(BM_Featurize)->ArgNames({"tokens"})->Arg(300)->Arg(3000);
