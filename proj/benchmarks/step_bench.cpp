// Per-step cost of the gradient engines and of the sparse kernels they use.
// Sequence-level sweeps with CSV output live in `sparseprop bench`.

#include <benchmark/benchmark.h>

#include "sparseprop/dataset.hpp"
#include "sparseprop/gradients.hpp"

namespace {

using namespace sparseprop;

void run_engine(benchmark::State& state, Method method) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto steps = static_cast<std::size_t>(state.range(1));
  NetworkSpec spec;
  spec.n_hidden = n;
  const auto net = init_network<float>(spec);
  const auto sample = to_sample<float>(generate_poisson_dataset(1, spec.n_inputs, steps, spec.n_classes, 0), 0);
  for (auto _ : state) benchmark::DoNotOptimize(compute_gradient(method, net, sample));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(steps));
}

void BM_EpropSparse(benchmark::State& s) { run_engine(s, Method::eprop_sparse); }
void BM_EpropNaive(benchmark::State& s) { run_engine(s, Method::eprop_naive); }
void BM_Rtrl(benchmark::State& s) { run_engine(s, Method::rtrl); }
void BM_Bptt(benchmark::State& s) { run_engine(s, Method::bptt); }

BENCHMARK(BM_EpropSparse)->ArgsProduct({{16, 64, 128, 256}, {100, 1000}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Bptt)->ArgsProduct({{16, 64, 128, 256}, {100, 1000}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EpropNaive)->ArgsProduct({{16, 32, 64}, {10}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Rtrl)->ArgsProduct({{16, 32, 64}, {10}})->Unit(benchmark::kMillisecond);

void BM_TraceUpdate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t k = 140;
  const StepModel<float> model(NeuronParams::make_lif(), n, k);
  const auto st = NeuronState<float>::zero(n, NeuronKind::lif);
  Buffer<float> w(n * k, 0.01f);
  Buffer<float> x(k, 1.0f);
  const auto step = model.step(st, w, x);
  auto trace = initial_trace<float>(NeuronParams::make_lif(), n, k);
  for (auto _ : state) {
    trace = eprop_trace_update(trace, step.H, step.F);
    benchmark::DoNotOptimize(trace.G.values().data());
  }
}
BENCHMARK(BM_TraceUpdate)->Arg(16)->Arg(128)->Arg(512);

void BM_StepJacobians(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t k = 140;
  const StepModel<float> model(NeuronParams::make_alif(), n, k);
  const auto st = NeuronState<float>::zero(n, NeuronKind::alif);
  Buffer<float> w(n * k, 0.01f);
  Buffer<float> x(k, 1.0f);
  for (auto _ : state) benchmark::DoNotOptimize(model.step(st, w, x));
}
BENCHMARK(BM_StepJacobians)->Arg(16)->Arg(128)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
