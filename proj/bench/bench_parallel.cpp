// Serial reference kernels against their OpenMP counterparts.

#include <random>

#include <benchmark/benchmark.h>

#include "stedit/baselines.hpp"
#include "stedit/kernel.hpp"
#include "stedit/transducer.hpp"

namespace {

using namespace stedit;

AlphabetPtr alphabet() {
  static const AlphabetPtr al = std::make_shared<const Alphabet>(std::vector<std::string>{"a", "b", "c", "d"});
  return al;
}

Str random_str(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  std::uniform_int_distribution<std::size_t> len(lo, hi);
  std::uniform_int_distribution<int> sym(1, static_cast<int>(alphabet()->size()));
  std::vector<Symbol> v(len(rng));
  for (auto& s : v) s = sym(rng);
  return Str(alphabet(), std::move(v));
}

MemorylessTransducer model() {
  std::mt19937_64 rng(42);
  std::vector<StrPair> pairs;
  for (int i = 0; i < 64; ++i) pairs.push_back({random_str(rng, 4, 10), random_str(rng, 4, 10)});
  EmOptions opt;
  opt.max_iter = 5;
  return em_fit(pairs, uniform_init(alphabet()), opt).model;
}

std::vector<Str> strings(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Str> xs;
  for (std::size_t i = 0; i < n; ++i) xs.push_back(random_str(rng, 6, 12));
  return xs;
}

void BM_GramSerial(benchmark::State& state) {
  const auto t = model();
  const auto xs = strings(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(gram_serial(t, xs).values.data());
}

void BM_GramParallel(benchmark::State& state) {
  const auto t = model();
  const auto xs = strings(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(gram(t, xs).values.data());
}

std::vector<StrPair> pair_batch(std::size_t n) {
  std::mt19937_64 rng(7);
  std::vector<StrPair> pairs;
  for (std::size_t i = 0; i < n; ++i) pairs.push_back({random_str(rng, 6, 14), random_str(rng, 6, 14)});
  return pairs;
}

void BM_EStepSerial(benchmark::State& state) {
  const auto t = model();
  const auto pairs = pair_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(expected_counts_serial(t, pairs).delta.data());
}

void BM_EStepParallel(benchmark::State& state) {
  const auto t = model();
  const auto pairs = pair_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(expected_counts(t, pairs).delta.data());
}

std::vector<LabeledStr> labeled(std::size_t n) {
  std::mt19937_64 rng(9);
  std::vector<LabeledStr> items;
  for (std::size_t i = 0; i < n; ++i) items.push_back({random_str(rng, 6, 12), i % 2 ? "odd" : "even"});
  return items;
}

void BM_KnnSerial(benchmark::State& state) {
  const auto train = labeled(static_cast<std::size_t>(state.range(0)));
  const auto queries = strings(64, 3);
  const auto measure = edit_dissimilarity_measure(model());
  for (auto _ : state) benchmark::DoNotOptimize(knn_classify_batch_serial(measure, train, 1, queries).data());
}

void BM_KnnParallel(benchmark::State& state) {
  const auto train = labeled(static_cast<std::size_t>(state.range(0)));
  const auto queries = strings(64, 3);
  const auto measure = edit_dissimilarity_measure(model());
  for (auto _ : state) benchmark::DoNotOptimize(knn_classify_batch(measure, train, 1, queries).data());
}

}  // namespace

BENCHMARK(BM_GramSerial)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GramParallel)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EStepSerial)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EStepParallel)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KnnSerial)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KnnParallel)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
