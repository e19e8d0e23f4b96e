#include <benchmark/benchmark.h>

#include <vector>

#include "critgrad/buffer.hpp"
#include "critgrad/optim.hpp"
#include "critgrad/problems.hpp"
#include "critgrad/random.hpp"
#include "critgrad/theory.hpp"

using namespace critgrad;

namespace {

std::vector<Vector> stream(std::size_t count, std::size_t d) {
  RandomState rs(7);
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(gaussian(rs, d, 1.0));
  return out;
}

void BM_BufferOffer(benchmark::State& state) {
  const auto capacity = static_cast<std::size_t>(state.range(0));
  const auto gs = stream(1024, 100);
  CriticalBuffer buffer(capacity, 0.9);
  std::size_t t = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(buffer.offer(gs[t % gs.size()], t));
    buffer.decay_all();
    ++t;
  }
}
BENCHMARK(BM_BufferOffer)->Arg(5)->Arg(20)->Arg(100);

void BM_Aggregate(benchmark::State& state) {
  const auto gs = stream(64, 100);
  CriticalBuffer buffer(static_cast<std::size_t>(state.range(0)), 0.9);
  for (std::size_t t = 0; t < gs.size(); ++t) buffer.offer(gs[t], t);
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(gs[0], buffer, AggregationMode::Mean));
}
BENCHMARK(BM_Aggregate)->Arg(5)->Arg(20);

void BM_RateSv(benchmark::State& state) {
  const RateQuery q{0.01, static_cast<std::size_t>(state.range(0)), 1.0, 10.0};
  for (auto _ : state) benchmark::DoNotOptimize(rate_sv(q));
}
BENCHMARK(BM_RateSv)->Arg(1)->Arg(5)->Arg(10)->Arg(20);

void BM_RateSr(benchmark::State& state) {
  const RateQuery q{0.01, static_cast<std::size_t>(state.range(0)), 1.0, 10.0};
  for (auto _ : state) benchmark::DoNotOptimize(rate_sr(q));
}
BENCHMARK(BM_RateSr)->Arg(1)->Arg(5)->Arg(10)->Arg(15);

void BM_TrainStep(benchmark::State& state) {
  const std::vector<double> eigs(50, 1.0);
  const auto problem = make_quadratic(eigs, Vector::zeros(50), true, 3);
  OptimizerState opt(Rule::Adam, Vector(std::vector<double>(50, 1.0)));
  CriticalBuffer buffer(5, 0.9);
  auto oracle = GradientOracle::additive_gaussian(0.1, RandomState(1));
  for (auto _ : state) {
    train(*problem, opt, buffer, AggregationMode::Mean, 1, oracle);
  }
}
BENCHMARK(BM_TrainStep);

}  // namespace

BENCHMARK_MAIN();
