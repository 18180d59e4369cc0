#include <benchmark/benchmark.h>

#include <random>

#include "w2gn/ad/tape.hpp"
#include "w2gn/data/toy.hpp"
#include "w2gn/icnn/batch_pass.hpp"
#include "w2gn/icnn/icnn_tape.hpp"
#include "w2gn/metrics/transport.hpp"
#include "w2gn/train/trainer.hpp"

namespace {

using namespace w2gn;

const icnn::DenseICNNSpec toy_spec{2, 2, {128, 128, 64}, 1e-6, 1.0};

data::SampleBatch gaussian(std::size_t dim, std::size_t n, std::uint64_t seed) {
  return data::sample(data::ToyDistribution::standard_gaussian(dim), n, seed);
}

// Scalar tape of a small net: gradient over every leaf, then one HVP sweep.
void BM_TapeGradient(benchmark::State& state) {
  const icnn::DenseICNNSpec spec{2, 2, {16, 16, 8}, 1e-6, 1.0};
  const auto net = icnn::init(spec, 1);
  const auto t = icnn::build_icnn_tape(spec);
  const std::vector<double> x{0.3, -0.7};
  const auto leaves = t.leaves(net, x);
  const auto wrt = t.parameter_slots();
  for (auto _ : state) benchmark::DoNotOptimize(ad::gradient(t.tape, leaves, wrt));
  state.counters["nodes"] = static_cast<double>(t.tape.node_count());
}
BENCHMARK(BM_TapeGradient);

void BM_TapeForwardOverReverse(benchmark::State& state) {
  const icnn::DenseICNNSpec spec{2, 2, {16, 16, 8}, 1e-6, 1.0};
  const auto net = icnn::init(spec, 1);
  const auto t = icnn::build_icnn_tape(spec);
  const std::vector<double> x{0.3, -0.7};
  const auto leaves = t.leaves(net, x);
  std::vector<double> tangent(leaves.size(), 0.0);
  for (auto slot : t.input_slots()) tangent[slot] = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(ad::forward_over_reverse(t.tape, leaves, tangent));
}
BENCHMARK(BM_TapeForwardOverReverse);

void BM_BatchPassBackward(benchmark::State& state) {
  const auto net = icnn::init(toy_spec, 2);
  const auto x = gaussian(2, static_cast<std::size_t>(state.range(0)), 3);
  std::vector<double> grad(net.parameter_count());
  for (auto _ : state) {
    const icnn::BatchPass pass(net, x.points);
    benchmark::DoNotOptimize(pass.backward({}, grad));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BatchPassBackward)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);

void BM_BatchPassSecondOrder(benchmark::State& state) {
  const auto net = icnn::init(toy_spec, 2);
  const auto x = gaussian(2, static_cast<std::size_t>(state.range(0)), 3);
  const auto v = gaussian(2, static_cast<std::size_t>(state.range(0)), 4);
  std::vector<double> grad(net.parameter_count());
  for (auto _ : state) {
    const icnn::BatchPass pass(net, x.points);
    benchmark::DoNotOptimize(pass.second_order(v.points, grad));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BatchPassSecondOrder)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);

// One full training step (objective, gradients, Adam, clipping) of the toy architecture.
void BM_W2gnStep(benchmark::State& state) {
  train::TrainConfig cfg;
  cfg.spec = toy_spec;
  cfg.batch_size = static_cast<std::size_t>(state.range(0));
  train::TrainState s(icnn::init(toy_spec, 5), icnn::init(toy_spec, 6), cfg);
  const auto x = gaussian(2, cfg.batch_size, 7);
  const auto y = data::sample(data::ToyDistribution::ring(), cfg.batch_size, 8);
  for (auto _ : state) benchmark::DoNotOptimize(train::w2gn_step(s, cfg, x, y));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_W2gnStep)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_Hungarian(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = gaussian(2, n, 9);
  const auto y = data::sample(data::ToyDistribution::ring(), n, 10);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::empirical_w2(x, y));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Hungarian)->RangeMultiplier(2)->Range(64, 512)->Complexity(benchmark::oNCubed)->Unit(benchmark::kMillisecond);

void BM_EnergyDistance(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = gaussian(2, n, 11);
  const auto y = data::sample(data::ToyDistribution::swiss_roll(), n, 12);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::energy_distance(x, y));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EnergyDistance)->RangeMultiplier(2)->Range(512, 4096)->Complexity(benchmark::oNSquared)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
