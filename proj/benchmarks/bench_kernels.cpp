#include <benchmark/benchmark.h>

#include "diffcdr/autodiff.hpp"
#include "diffcdr/pipeline.hpp"
#include "diffcdr/rng.hpp"
#include "diffcdr/samplers.hpp"
#include "diffcdr/score_network.hpp"

namespace diffcdr {
namespace {

ScoreNetwork trained_like_net() {
  ScoreNetwork net;
  // A zero last layer would make the solver trivially cheap to reason about;
  // give it weights of realistic scale.
  Rng rng(7);
  net.params().mutable_value("mlp.2.w") = rng.normal_tensor({net.config().hidden, net.dim()}, 0.05);
  return net;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto a = rng.normal_tensor({n, 128});
  const auto b = rng.normal_tensor({128, 128});
  for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(256);

void BM_ScoreForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto net = trained_like_net();
  Rng rng(2);
  const auto x = rng.normal_tensor({n, 10});
  const auto c = rng.normal_tensor({n, 10});
  for (auto _ : state) benchmark::DoNotOptimize(net.predict(x, 0.5, &c));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_ScoreForward)->Arg(16)->Arg(256);

void BM_DimTrainStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto net = trained_like_net();
  const NoiseSchedule schedule;
  Rng rng(3);
  const auto x0 = rng.normal_tensor({n, 10});
  const auto c = rng.normal_tensor({n, 10});
  for (auto _ : state) {
    Tape tape;
    tape.backward(dim_loss(tape, net, x0, c, schedule, 0.1, rng));
    adam_step(net.params(), AdamConfig{});
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_DimTrainStep)->Arg(16)->Arg(64);

// Users per second through guided DPM-Solver-1 sampling.
void BM_Solver(benchmark::State& state) {
  const auto nfe = static_cast<std::size_t>(state.range(0));
  const auto net = trained_like_net();
  const NoiseSchedule schedule;
  Rng rng(4);
  const auto src = rng.normal_tensor({64, 10});
  const SolverConfig cfg{.nfe = nfe};
  for (auto _ : state) benchmark::DoNotOptimize(dpm_solver1(net, schedule, cfg, &src, 0.1, src));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_Solver)->Arg(10)->Arg(30);

}  // namespace
}  // namespace diffcdr

// Own main: the distro's benchmark_main archive carries LTO bytecode from a
// different compiler patch level.
BENCHMARK_MAIN();
