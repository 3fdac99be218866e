#include <benchmark/benchmark.h>

#include "mfnet/coupling.hpp"
#include "mfnet/nlmp.hpp"
#include "mfnet/simulation.hpp"

namespace {

using namespace mfnet;

ValidatedNetwork e1(int K) {
  NetworkSpec s;
  s.num_classes = 2;
  s.routing = RoutingMatrix(2, {0.0, 0.5, 0.0, 0.0});
  s.lambda = LambdaSchedule(std::vector<double>{0.05, 0.05});
  s.discipline = DisciplineSpec{DisciplineKind::Fifo, {1.0, 1.0}};
  s.truncation_K = K;
  return validate_spec(s);
}

void BM_MasterRhs(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const auto net = e1(K);
  const WordSpace space(2, K, net.discipline());
  MeasureState mu;
  mu.weights.assign(space.size(), 1.0 / static_cast<double>(space.size()));
  for (auto _ : state) {
    const auto f = compute_flows(mu, net.lambda_at(0.0), net, space);
    benchmark::DoNotOptimize(master_rhs(mu, f.v, space));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(space.size()));
}
BENCHMARK(BM_MasterRhs)->Arg(6)->Arg(8)->Arg(10)->Arg(12);

void BM_NlmpStep(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const auto net = e1(K);
  const WordSpace space(2, K, net.discipline());
  NlmpSolver solver(net, space, 0.01);
  MeasureState mu = MeasureState::point_mass(space, QueueWord{1, 1, 1});
  for (auto _ : state) solver.step(mu);
}
BENCHMARK(BM_NlmpStep)->Arg(8)->Arg(10);

void BM_CoupledRhs(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const auto net = e1(K);
  const WordSpace space(2, K, net.discipline());
  const std::size_t n = space.size();
  CoupledState c = CoupledState::zero(n);
  const double unit = 1.0 / static_cast<double>(n * n);
  for (std::size_t y = 0; y < n; ++y) {
    c.white[y] = unit;
    for (std::size_t z = 0; z < n; ++z) {
      if (y != z) c.red_at(y, z) = unit;
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(coupled_rhs(c, net.lambda_at(0.0), net, space));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_CoupledRhs)->Arg(4)->Arg(6)->Arg(8);

void BM_Simulate(benchmark::State& state) {
  const auto net = e1(8);
  SimulationConfig cfg;
  cfg.M = static_cast<std::size_t>(state.range(0));
  cfg.t_end = 50.0;
  cfg.sample_interval = 50.0;
  std::uint64_t events = 0;
  for (auto _ : state) {
    const auto s = simulate(net, cfg);
    events += s.event_count;
    ++cfg.seed;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(events));
}
BENCHMARK(BM_Simulate)->Arg(1000)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
