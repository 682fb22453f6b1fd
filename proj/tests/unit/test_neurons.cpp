#include <gtest/gtest.h>

#include <random>

#include "step_oracle.hpp"
#include "sparseprop/neurons.hpp"

namespace {

using namespace sparseprop;

NeuronState<double> state_of(std::vector<double> u, std::vector<double> z, std::vector<double> a = {}) {
  NeuronState<double> s;
  s.u.assign(u.begin(), u.end());
  s.z.assign(z.begin(), z.end());
  s.a.assign(a.begin(), a.end());
  return s;
}

TEST(Lif, HandEvaluatedSteps) {
  const std::vector<double> i06{0.6}, i0{0.0};
  auto s = lif_step(state_of({0.5}, {0}), std::span<const double>(i06), LIFParams{});
  EXPECT_NEAR(s.u[0], 1.075, 1e-15);
  EXPECT_EQ(s.z[0], 1.0);
  s = lif_step(state_of({0.0}, {0}), std::span<const double>(i0), LIFParams{});
  EXPECT_EQ(s.u[0], 0.0);
  EXPECT_EQ(s.z[0], 0.0);
  s = lif_step(state_of({0.5}, {0}), std::span<const double>(i0), LIFParams{});
  EXPECT_NEAR(s.u[0], 0.475, 1e-15);
  EXPECT_EQ(s.z[0], 0.0);
}

TEST(Lif, SpikeAtExactThreshold) {
  const std::vector<double> i{1.0};
  EXPECT_EQ(lif_step(state_of({0.0}, {0}), std::span<const double>(i), LIFParams{}).z[0], 1.0);
}

TEST(Lif, SoftResetSubtractsTheta) {
  LIFParams p;
  p.soft_reset = true;
  const std::vector<double> i{0.1};
  EXPECT_NEAR(lif_step(state_of({1.2}, {1}), std::span<const double>(i), p).u[0], 0.95 * 1.2 + 0.1 - 1.0, 1e-15);
}

TEST(Lif, ShapeMismatch) {
  const std::vector<double> i{0.1, 0.2};
  EXPECT_THROW(lif_step(state_of({0.0}, {0}), std::span<const double>(i), LIFParams{}), ShapeMismatch);
}

TEST(Alif, HandEvaluatedStep) {
  const std::vector<double> i{0.6};
  const auto s = alif_step(state_of({0.5}, {0}, {1.0}), std::span<const double>(i), ALIFParams{});
  EXPECT_NEAR(s.a[0], 0.96, 1e-15);
  EXPECT_NEAR(s.u[0], 1.075, 1e-15);
  EXPECT_EQ(s.z[0], 0.0);  // threshold 1 + 0.8 * 0.96 = 1.768
}

TEST(Alif, ZeroBetaIsLif) {
  ALIFParams p;
  p.beta = 0.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-1.0, 2.0);
  for (int t = 0; t < 20; ++t) {
    const std::vector<double> i{dist(rng), dist(rng)};
    const auto st = state_of({dist(rng), dist(rng)}, {0, 1}, {dist(rng), dist(rng)});
    const auto a = alif_step(st, std::span<const double>(i), p);
    const auto l = lif_step(st, std::span<const double>(i), p.lif);
    EXPECT_EQ(std::vector<double>(a.u.begin(), a.u.end()), std::vector<double>(l.u.begin(), l.u.end()));
    EXPECT_EQ(std::vector<double>(a.z.begin(), a.z.end()), std::vector<double>(l.z.begin(), l.z.end()));
  }
}

TEST(Alif, AdaptationJumpsAfterSpike) {
  ALIFParams p;
  p.rho = 1.0 - 1e-12;
  const std::vector<double> i{0.0};
  const auto s = alif_step(state_of({0.0}, {1}, {0.3}), std::span<const double>(i), p);
  EXPECT_NEAR(s.a[0], 1.3, 1e-9);
}

TEST(Readout, Examples) {
  const std::vector<double> w{2.0}, z{1.0}, v{1.0}, zero{0.0};
  ReadoutParams<double> p{w, 1, 1, 0.95};
  EXPECT_NEAR(readout_step<double>(v, z, p)[0], 2.95, 1e-15);
  EXPECT_NEAR(readout_step<double>(v, zero, p)[0], 0.95, 1e-15);
  p.kappa = 0.0;
  EXPECT_EQ(readout_step<double>(v, z, p)[0], 2.0);
  const std::vector<double> bad{1.0, 2.0};
  EXPECT_THROW(readout_step<double>(v, bad, p), ShapeMismatch);
}

oracle::StepPoint random_point(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> st(-0.5, 2.0), w(-0.5, 0.5);
  oracle::StepPoint pt;
  pt.u.resize(n);
  pt.a.resize(n);
  pt.w.resize(n * k);
  pt.x.resize(k);
  for (auto& v : pt.u) v = st(rng);
  for (auto& v : pt.a) v = std::abs(st(rng));
  for (auto& v : pt.w) v = w(rng);
  for (auto& v : pt.x) v = static_cast<double>(rng() % 3);
  return pt;
}

void check_against_fd(const NeuronParams& p) {
  const std::size_t n = 4, k = 3;
  const StepModel<double> model(p, n, k);
  std::mt19937_64 rng(17);
  const bool alif = p.kind == NeuronKind::alif;
  for (int trial = 0; trial < 20; ++trial) {
    const auto pt = random_point(n, k, rng);
    NeuronState<double> s;
    s.u.assign(pt.u.begin(), pt.u.end());
    if (alif) s.a.assign(pt.a.begin(), pt.a.end());
    s.z.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.z[i] = emit_spike(p, s.u[i], alif ? s.a[i] : 0.0, {});
    const auto j = model.step(s, pt.w, pt.x);
    EXPECT_LE(oracle::max_rel_err(oracle::expand(j.H), oracle::fd_state_jacobian(p, pt, 1e-6), 1e-8), 1e-5);
    EXPECT_LE(oracle::max_rel_err(oracle::expand(j.F), oracle::fd_weight_jacobian(p, pt, 1e-6), 1e-8), 1e-5);
    EXPECT_FALSE(j.H.structure().is_dense());
    EXPECT_FALSE(j.F.structure().is_dense());
  }
}

TEST(StepJacobians, LifMatchesFiniteDifferences) { check_against_fd(NeuronParams::make_lif()); }

TEST(StepJacobians, LifSoftResetMatchesFiniteDifferences) {
  LIFParams l;
  l.soft_reset = true;
  check_against_fd(NeuronParams::make_lif(l));
}

TEST(StepJacobians, AlifMatchesFiniteDifferences) { check_against_fd(NeuronParams::make_alif()); }

TEST(StepJacobians, LifHIsAlphaRegardlessOfState) {
  const std::vector<double> w(6, 0.3), x{1, 0};
  for (double u : {-3.0, 0.0, 0.99, 1.0, 7.0}) {
    const auto s = state_of({u, u, u}, {0, 0, 0});
    const auto j = step_jacobians<double>(NeuronParams::make_lif(), s, w, x, 3, 2);
    EXPECT_EQ(j.H.structure().tag(), "delta(0,0)[3|3]");
    for (double v : j.H.values()) EXPECT_DOUBLE_EQ(v, 0.95);
  }
}

TEST(StepJacobians, SoftResetDiagonal) {
  LIFParams l;
  l.soft_reset = true;
  const std::vector<double> w(2, 0.0), x{0.0};
  const double u = 1.1;
  const auto j = step_jacobians<double>(NeuronParams::make_lif(l), state_of({u, u}, {1, 1}), w, x, 2, 1);
  const double sg = 1.0 / std::pow(1.0 + 10.0 * 0.1, 2);
  EXPECT_NEAR(j.H.values()[0], 0.95 - sg, 1e-14);
}

TEST(StepJacobians, AlifBlocks) {
  const auto p = NeuronParams::make_alif();
  const std::vector<double> w(2, 0.0), x{0.0};
  const double u = 1.3, a = 0.2;
  const auto j = step_jacobians<double>(p, state_of({u, u}, {1, 1}, {a, a}), w, x, 2, 1);
  const double sg = 1.0 / std::pow(1.0 + 10.0 * std::abs(u - 1.0 - 0.8 * a), 2);
  const auto v = j.H.values();
  EXPECT_NEAR(v[0], 0.95, 1e-15);
  EXPECT_NEAR(v[1], 0.0, 1e-15);
  EXPECT_NEAR(v[2], sg, 1e-14);
  EXPECT_NEAR(v[3], 0.96 - 0.8 * sg, 1e-14);
}

TEST(StepJacobians, AlifWithZeroBetaHasLifUBlock) {
  ALIFParams ap;
  ap.beta = 0.0;
  const std::vector<double> w{0.1, 0.2, 0.3, 0.4}, x{1, 1};
  const auto ja = step_jacobians<double>(NeuronParams::make_alif(ap), state_of({0.4, 1.2}, {0, 1}, {0.1, 0.5}), w, x, 2, 2);
  const auto jl = step_jacobians<double>(NeuronParams::make_lif(), state_of({0.4, 1.2}, {0, 1}), w, x, 2, 2);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(ja.H.values()[i * 4], jl.H.values()[i]);
}

TEST(StepJacobians, NextStateMatchesNeuronStep) {
  const auto p = NeuronParams::make_alif();
  const std::vector<double> w{0.5, -0.2, 0.9, 0.4}, x{1, 2};
  const auto s = state_of({0.4, 1.2}, {0, 1}, {0.5, 0.1});
  const auto j = step_jacobians<double>(p, s, w, x, 2, 2);
  const std::vector<double> current{0.5 - 0.4, 0.9 + 0.8};
  const auto ref = neuron_step(s, std::span<const double>(current), p);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(j.next.u[i], ref.u[i], 1e-15);
    EXPECT_NEAR(j.next.a[i], ref.a[i], 1e-15);
    EXPECT_EQ(j.next.z[i], ref.z[i]);
  }
}

TEST(StepProgram, ExportsSpikesWhenAsked) {
  const auto p = neuron_step_program(NeuronParams::make_lif(), 3, 2, {true, true});
  EXPECT_EQ(p.outputs, (std::vector<std::string>{"u1", "z1"}));
  EXPECT_THROW(NeuronParams::make_alif(ALIFParams{LIFParams{1.5}}).validate(), std::invalid_argument);
}

}  // namespace
