#include <string>

#include <benchmark/benchmark.h>

#include "lexanon/privacy_evaluator.hpp"

namespace {

using namespace lexanon;

void BM_MatchIdentity(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        match_identity("Dr. J. K. Rowling,", "j.k. rowling", AttributeKind::named_person));
    benchmark::DoNotOptimize(
        match_identity("Jean-Paul Sartre", "Simone de Beauvoir", AttributeKind::named_person));
  }
}
BENCHMARK(BM_MatchIdentity);

void BM_ParseGuessList(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  std::string reply = "Here are my guesses:\n";
  for (int i = 1; i <= k; ++i) {
    reply += std::to_string(i) + ". **Candidate Person " + std::to_string(i) +
             "** - a plausible match\n";
  }
  for (auto _ : state) benchmark::DoNotOptimize(parse_guess_list(reply, k));
}
BENCHMARK(BM_ParseGuessList)->Arg(5)->Arg(10)->Arg(50);

}  // namespace
