#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sparseprop/arena.hpp"
#include "sparseprop/dataset.hpp"
#include "sparseprop/gradients.hpp"

namespace {

using namespace sparseprop;

struct Instance {
  Network<double> net;
  Sample<double> sample;
};

Instance make_instance(NeuronParams neuron, std::size_t n, std::size_t k, std::size_t steps, std::uint64_t seed,
                       double weight_scale = 1.0) {
  NetworkSpec spec;
  spec.neuron = neuron;
  spec.n_hidden = n;
  spec.n_inputs = k;
  spec.seed = seed;
  auto net = init_network<double>(spec);
  for (auto& w : net.w) w *= weight_scale;
  auto sample = to_sample<double>(generate_poisson_dataset(1, k, steps, spec.n_classes, seed + 1000), 0);
  return {std::move(net), std::move(sample)};
}

double max_dev(const GradAccumulator<double>& a, const GradAccumulator<double>& b) {
  return gradient_deviation_stats(a, b).max;
}

NeuronParams soft_lif() {
  LIFParams l;
  l.soft_reset = true;
  return NeuronParams::make_lif(l);
}

// --- trace recursion ----------------------------------------------------------------

TEST(Trace, FirstStepEqualsF) {
  const std::size_t n = 3, k = 2;
  const StepModel<double> model(NeuronParams::make_lif(), n, k);
  const std::vector<double> w{0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, x{1, 0};
  const auto st = NeuronState<double>::zero(n, NeuronKind::lif);
  const auto j = model.step(st, w, x);
  const auto g1 = eprop_trace_update(initial_trace<double>(NeuronParams::make_lif(), n, k), j.H, j.F);
  EXPECT_EQ(oracle::expand(g1.G), oracle::expand(j.F));
  EXPECT_FALSE(g1.G.structure().is_dense());
}

TEST(Trace, LifSecondStepIsGeometric) {
  const std::size_t n = 2, k = 3;
  const StepModel<double> model(NeuronParams::make_lif(), n, k);
  const std::vector<double> w(n * k, 0.1), x0{1, 0, 1}, x1{0, 1, 1};
  auto st = NeuronState<double>::zero(n, NeuronKind::lif);
  auto trace = initial_trace<double>(NeuronParams::make_lif(), n, k);
  for (const auto* x : {&x0, &x1}) {
    auto j = model.step(st, w, *x);
    trace = eprop_trace_update(trace, j.H, j.F);
    st = j.next;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) EXPECT_NEAR(trace.G.values()[i * k + c], 0.95 * x0[c] + x1[c], 1e-15);
}

TEST(Trace, ZeroHKeepsOnlyF) {
  const std::size_t n = 2, k = 2;
  const auto f_s = StructureDescriptor{{n}, {n, k}, {{0, 0}}, {}};
  std::mt19937_64 rng(3);
  const auto f = oracle::random_tensor<double>(f_s, rng);
  const auto h = zeros<double>(StructureDescriptor{{n}, {n}, {{0, 0}}, {}});
  TraceState<double> g = initial_trace<double>(NeuronParams::make_lif(), n, k);
  for (int t = 0; t < 3; ++t) g = eprop_trace_update(g, h, f);
  EXPECT_EQ(oracle::expand(g.G), oracle::expand(f));
}

TEST(Trace, DenseOperandSignalsFallback) {
  const std::size_t n = 2, k = 2;
  const auto g0 = initial_trace<double>(NeuronParams::make_lif(), n, k);
  const auto h = zeros<double>(StructureDescriptor::dense({n}, {n}));
  const auto f = zeros<double>(StructureDescriptor{{n}, {n, k}, {{0, 0}}, {}});
  EXPECT_THROW(eprop_trace_update(g0, h, f), StructureFallback);
}

// --- learning signal and accumulation ------------------------------------------------

TEST(LearningSignal, Cases) {
  const std::vector<double> w_id{1, 0, 0, 1}, ones{1, 1}, g{0.3, -0.7}, zero{0, 0};
  const ReadoutParams<double> ro{w_id, 2, 2, 0.95};
  const auto c = learning_signal<double>(g, ro, ones);
  EXPECT_EQ(c[0], 0.3);
  EXPECT_EQ(c[1], -0.7);
  const auto c0 = learning_signal<double>(zero, ro, ones);
  EXPECT_EQ(c0[0], 0.0);
  const std::vector<double> three{1, 1, 1};
  EXPECT_THROW(learning_signal<double>(g, ro, three), ShapeMismatch);
}

TEST(Accumulate, ZeroSignalLeavesAccumulator) {
  const std::size_t n = 2, k = 2;
  std::mt19937_64 rng(4);
  const TraceState<double> tr{oracle::random_tensor<double>(StructureDescriptor{{n}, {n, k}, {{0, 0}}, {}}, rng), true};
  std::vector<double> acc{1, 2, 3, 4};
  const std::vector<double> zero{0, 0};
  accumulate_param_grad<double>(acc, zero, tr);
  EXPECT_EQ(acc, (std::vector<double>{1, 2, 3, 4}));
  const std::vector<double> bad{0, 0, 0};
  EXPECT_THROW(accumulate_param_grad<double>(acc, bad, tr), ShapeMismatch);
}

TEST(Accumulate, MemorylessLimitSumsSignalTimesF) {
  const std::size_t n = 2, k = 2;
  std::mt19937_64 rng(5);
  const auto f_s = StructureDescriptor{{n}, {n, k}, {{0, 0}}, {}};
  const auto f1 = oracle::random_tensor<double>(f_s, rng), f2 = oracle::random_tensor<double>(f_s, rng);
  const std::vector<double> c1{0.5, -1.0}, c2{2.0, 0.25};
  std::vector<double> acc(n * k, 0.0);
  accumulate_param_grad<double>(acc, c1, TraceState<double>{f1, true});
  accumulate_param_grad<double>(acc, c2, TraceState<double>{f2, true});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j)
      EXPECT_NEAR(acc[i * k + j], c1[i] * f1.values()[i * k + j] + c2[i] * f2.values()[i * k + j], 1e-15);
}

TEST(Bptt, SingleStepIsSignalTimesInput) {
  auto in = make_instance(NeuronParams::make_lif(), 5, 4, 1, 2, 4.0);
  const auto g = bptt_gradient(in.net, in.sample);
  const auto lg = loss_and_grad<double>(g.readout_sum, in.sample.label);
  const auto fw = forward(in.net, in.sample, {}, true);
  std::vector<double> sg(5);
  for (std::size_t i = 0; i < 5; ++i) sg[i] = surrogate_grad(fw.spike_args[i], 10.0);
  const auto c = learning_signal<double>(lg.grad, in.net.readout(), sg);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(g.dw[i * 4 + j], c[i] * in.sample.at(0)[j], 1e-14);
  EXPECT_LE(max_dev(g, eprop_sparse_gradient(in.net, in.sample)), 1e-15);
  EXPECT_LE(max_dev(g, rtrl_gradient_dense(in.net, in.sample)), 1e-15);
}

// --- engine agreement ----------------------------------------------------------------

TEST(Engines, SparseMatchesBpttExactly) {
  for (const auto& neuron : {NeuronParams::make_lif(), soft_lif(), NeuronParams::make_alif()})
    for (std::size_t n : {8, 32})
      for (std::size_t steps : {10, 100})
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
          const auto in = make_instance(neuron, n, 20, steps, seed, 3.0);
          const auto s = eprop_sparse_gradient(in.net, in.sample);
          EXPECT_TRUE(s.structure_intact);
          EXPECT_LE(max_dev(s, bptt_gradient(in.net, in.sample)), 1e-10)
              << neuron_name(neuron.kind) << " n=" << n << " T=" << steps << " seed=" << seed;
        }
}

TEST(Engines, AllFourAgree) {
  for (const auto& neuron : {NeuronParams::make_lif(), NeuronParams::make_alif()}) {
    const auto in = make_instance(neuron, 6, 5, 12, 9, 4.0);
    const auto s = eprop_sparse_gradient(in.net, in.sample);
    EXPECT_LE(max_dev(s, naive_eprop_gradient(in.net, in.sample)), 1e-10);
    EXPECT_LE(max_dev(s, rtrl_gradient_dense(in.net, in.sample)), 1e-10);
    EXPECT_LE(max_dev(s, bptt_gradient(in.net, in.sample)), 1e-10);
    EXPECT_NEAR(s.loss, bptt_gradient(in.net, in.sample).loss, 1e-12);
  }
}

TEST(Engines, RtrlSmallMatchesBptt) {
  const auto in = make_instance(NeuronParams::make_lif(), 4, 3, 5, 1, 5.0);
  EXPECT_LE(max_dev(rtrl_gradient_dense(in.net, in.sample), bptt_gradient(in.net, in.sample)), 1e-10);
}

TEST(Engines, DenseCapsRaiseResourceLimit) {
  const auto in = make_instance(NeuronParams::make_lif(), 16, 10, 2, 1);
  GradientOptions o;
  o.max_dense_elements = 1000;
  EXPECT_THROW(rtrl_gradient_dense(in.net, in.sample, o), ResourceLimit);
  EXPECT_THROW(naive_eprop_gradient(in.net, in.sample, o), ResourceLimit);
  EXPECT_NO_THROW(eprop_sparse_gradient(in.net, in.sample, o));
}

TEST(Engines, SampleChannelMismatch) {
  auto in = make_instance(NeuronParams::make_lif(), 4, 3, 5, 1);
  in.sample.channels = 2;
  EXPECT_THROW(eprop_sparse_gradient(in.net, in.sample), ShapeMismatch);
}

TEST(Engines, NaiveTraceIsNTimesLarger) {
  const std::size_t n = 16, k = 10;
  const auto in = make_instance(NeuronParams::make_lif(), n, k, 3, 1);
  auto peak = [&](Method m) {
    ArenaScope scope;
    (void)compute_gradient(m, in.net, in.sample);
    return static_cast<double>(scope.stats().high_water_bytes);
  };
  const double trace_bytes = static_cast<double>(n * k * sizeof(double));
  const double extra = peak(Method::eprop_naive) - peak(Method::eprop_sparse);
  // The dense G, F and their sum each hold n^2 k values instead of n k.
  EXPECT_GE(extra, static_cast<double>(n - 1) * trace_bytes);
}

TEST(Engines, OnStepSeesConstantLiveBytes) {
  const auto in = make_instance(NeuronParams::make_alif(), 16, 10, 40, 2, 3.0);
  ArenaScope scope;
  std::vector<std::size_t> live;
  GradientOptions o;
  o.on_step = [&](std::size_t) { live.push_back(arena_stats().live_bytes); };
  (void)eprop_sparse_gradient(in.net, in.sample, o);
  ASSERT_EQ(live.size(), 40u);
  for (std::size_t t = 2; t < live.size(); ++t) EXPECT_EQ(live[t], live[2]);
}

// --- finite differences ----------------------------------------------------------------

TEST(FiniteDifference, Quadratic) {
  const std::vector<double> x{0.5, -2.0, 3.0};
  const auto d = central_differences([](std::span<const double> p) { return p[0] * p[0] + p[1] * p[1] + p[2] * p[2]; },
                                     x, 1e-4);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(d[i], 2 * x[i], 1e-8);
}

TEST(FiniteDifference, SmoothModeMatchesBptt) {
  for (const auto& neuron : {NeuronParams::make_lif(), soft_lif(), NeuronParams::make_alif()}) {
    const auto in = make_instance(neuron, 16, 8, 20, 3, 3.0);
    GradientOptions o;
    o.eval.smooth_forward = true;
    const auto b = bptt_gradient(in.net, in.sample, o);
    const auto f = finite_difference_gradient(in.net, in.sample, 1e-6, o.eval);
    const auto bf = b.flat(), ff = f.flat();
    double scale = 0.0;
    for (double v : ff) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < bf.size(); ++i) EXPECT_LE(std::abs(bf[i] - ff[i]), 1e-4 * scale) << i;
    EXPECT_LE(max_dev(eprop_sparse_gradient(in.net, in.sample, o), b), 1e-10);
  }
}

TEST(FiniteDifference, ReadoutWeightsUnderHardThreshold) {
  const auto in = make_instance(NeuronParams::make_lif(), 8, 6, 15, 4, 3.0);
  const auto b = bptt_gradient(in.net, in.sample);
  const auto f = finite_difference_gradient(in.net, in.sample, 1e-6);
  for (std::size_t i = 0; i < b.dw_out.size(); ++i) EXPECT_NEAR(b.dw_out[i], f.dw_out[i], 1e-6);
}

TEST(FiniteDifference, NearThresholdFlipIsDetected) {
  NetworkSpec spec;
  spec.n_hidden = 1;
  spec.n_inputs = 1;
  auto net = init_network<double>(spec);
  net.w[0] = 1.0;  // u_1 = 1 = theta exactly
  Sample<double> s{2, 1, {1.0, 0.0}, 0};
  EXPECT_THROW(finite_difference_gradient(net, s, 1e-6), SpikeFlipDetected);
}

// --- deviation statistics ----------------------------------------------------------------

TEST(Deviation, IdenticalIsZero) {
  const std::vector<double> g{1, 2, 3};
  const auto s = gradient_deviation_stats(std::span<const double>(g), std::span<const double>(g));
  EXPECT_EQ(s.median, 0.0);
  EXPECT_EQ(s.q_low, 0.0);
  EXPECT_EQ(s.q_high, 0.0);
}

TEST(Deviation, MedianInterpolates) {
  const std::vector<double> a{1, 2, 3, 4}, z{0, 0, 0, 0};
  const auto s = gradient_deviation_stats(std::span<const double>(a), std::span<const double>(z));
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_DOUBLE_EQ(s.q_low, 1.0 + 0.025 * 3);
  EXPECT_DOUBLE_EQ(s.q_high, 1.0 + 0.975 * 3);
  EXPECT_EQ(s.max, 4.0);
  const std::vector<double> three{1, 2, 3};
  EXPECT_THROW(gradient_deviation_stats(std::span<const double>(a), std::span<const double>(three)), ShapeMismatch);
}

TEST(Methods, NamesRoundTrip) {
  for (auto m : {Method::eprop_sparse, Method::eprop_naive, Method::rtrl, Method::bptt})
    EXPECT_EQ(parse_method(method_name(m)), m);
  EXPECT_THROW(parse_method("adjoint"), std::invalid_argument);
}

}  // namespace
