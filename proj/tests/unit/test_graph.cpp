#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "sparseprop/graph.hpp"
#include "sparseprop/neurons.hpp"

#ifndef SPARSEPROP_GOLDEN_DIR
#error "SPARSEPROP_GOLDEN_DIR must be defined"
#endif

namespace {

using namespace sparseprop;

using Inputs = std::vector<std::vector<double>>;

std::vector<Buffer<double>> eval(const CompGraph<double>& g, const Inputs& in, EvalOptions opt = {}) {
  std::vector<std::span<const double>> spans(in.begin(), in.end());
  return evaluate(g, std::span<const std::span<const double>>(spans), opt);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

TEST(Graph, ScalarMulProgram) {
  Program p{{{"x", {3}}}, {{"y", OpKind::scalar_mul, {"x"}, 2.0}}, {"y"}};
  const auto g = build_graph<double>(p);
  EXPECT_EQ(g.vertices().size(), 2u);
  EXPECT_EQ(g.edges().size(), 1u);
  const auto v = eval(g, {{1, 2, 3}});
  EXPECT_EQ(std::vector<double>(v[1].begin(), v[1].end()), (std::vector<double>{2, 4, 6}));
}

TEST(Graph, UndefinedValue) {
  Program p{{{"x", {3}}}, {{"y", OpKind::add, {"x", "w"}}}, {"y"}};
  EXPECT_THROW(build_graph<double>(p), UndefinedValue);
}

TEST(Graph, ShapeMismatch) {
  Program p{{{"x", {3}}, {"w", {2}}}, {{"y", OpKind::add, {"x", "w"}}}, {"y"}};
  EXPECT_THROW(build_graph<double>(p), ShapeMismatch);
}

TEST(Graph, LinearizedLifStepMatchesGolden) {
  const auto g = build_graph<double>(lif_figure_program(3, 2));
  const auto lin = linearize(g, eval(g, {{0.95}, {0.1, 0.2, 0.3}, std::vector<double>(6, 0.5), {1, 0}, {1, 1, 1}}));
  EXPECT_EQ(lin.dump(), read_file(std::string(SPARSEPROP_GOLDEN_DIR) + "/lif_step_linearized.txt"));
}

TEST(Graph, LifStepEdgesCarryDeltaPairs) {
  const auto g = build_graph<double>(lif_figure_program(4, 3));
  const auto lin = linearize(g, eval(g, {{0.9}, {0, 0, 0, 0}, std::vector<double>(12, 0.1), {1, 0, 1}, {1, 1, 1, 1}}));
  const auto alpha = g.id_of("alpha"), z = g.id_of("z");
  for (const auto& [key, partial] : lin.edges()) {
    ASSERT_TRUE(partial.has_value());
    const bool exempt = key.first == alpha || key.first == z;  // scalar alpha and the matvec w.r.t. z
    EXPECT_EQ(partial->structure().is_dense(), exempt) << key.first << " -> " << key.second;
  }
  EXPECT_EQ(lin.partial(g.id_of("W"), g.id_of("Wz"))->structure().tag(), "delta(0,0)[4|4,3]");
}

TEST(Graph, TopoOrderChainAndDiamond) {
  CompGraph<double> chain;
  const auto x = chain.add_vertex(OpKind::constant, {1});
  const auto a = chain.add_vertex(OpKind::scalar_mul, {1}, {x}, "a", 2.0);
  const auto b = chain.add_vertex(OpKind::scalar_mul, {1}, {a}, "b", 2.0);
  EXPECT_EQ(topo_order(chain), (std::vector<VertexId>{x, a, b}));

  Program p{{{"x", {2}}},
            {{"a", OpKind::scalar_mul, {"x"}, 2.0}, {"b", OpKind::scalar_mul, {"x"}, 3.0}, {"y", OpKind::add, {"a", "b"}}},
            {"y"}};
  const auto d = build_graph<double>(p);
  EXPECT_EQ(topo_order(d), (std::vector<VertexId>{0, 1, 2, 3}));
}

TEST(Graph, BackEdgeIsCycle) {
  Program p{{{"x", {2}}},
            {{"a", OpKind::scalar_mul, {"x"}, 2.0}, {"b", OpKind::scalar_mul, {"a"}, 3.0}},
            {"b"}};
  auto g = build_graph<double>(p);
  g.set_edge(g.id_of("b"), g.id_of("a"));
  EXPECT_THROW(topo_order(g), CycleDetected);
}

TEST(Graph, AddPartialsAreIdentities) {
  Vertex v{2, OpKind::add, "y", {3}, {0, 1}, 0.0};
  const std::vector<double> x{1, 2, 3}, y{4, 5, 6};
  const std::vector<std::span<const double>> args{x, y};
  const auto parts = local_partials<double>(v, args);
  ASSERT_EQ(parts.size(), 2u);
  for (const auto& p : parts) EXPECT_EQ(oracle::expand(p), (std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1}));
}

TEST(Graph, MatvecPartialWrtWeightsHoldsInputRows) {
  Vertex v{2, OpKind::matvec, "y", {2}, {0, 1}, 0.0};
  const std::vector<double> w{1, 2, 3, 4, 5, 6}, z{1, 0, 2};
  const std::vector<std::span<const double>> args{w, z};
  const auto parts = local_partials<double>(v, args);
  EXPECT_EQ(parts[0].structure().tag(), "delta(0,0)[2|2,3]");
  EXPECT_EQ(std::vector<double>(parts[0].values().begin(), parts[0].values().end()),
            (std::vector<double>{1, 0, 2, 1, 0, 2}));
}

TEST(Graph, SurrogatePeakIsOne) {
  Vertex v{1, OpKind::surrogate_threshold, "z", {1}, {0}, 10.0};
  const std::vector<double> x{0.0};
  const std::vector<std::span<const double>> args{x};
  EXPECT_DOUBLE_EQ(local_partials<double>(v, args)[0].values()[0], 1.0);
  EXPECT_EQ(heaviside(0.0), 1.0);
  EXPECT_EQ(heaviside(-1e-300), 0.0);
}

// Every op's partials against central differences of its own forward rule.
TEST(Graph, LocalPartialsMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  struct Case {
    OpKind op;
    std::vector<Dims> arg_shapes;
    Dims out_shape;
    double attr;
  };
  const std::size_t n = 3;
  const std::vector<Case> cases{
      {OpKind::add, {{n}, {n}}, {n}, 0},
      {OpKind::subtract, {{n}, {n}}, {n}, 0},
      {OpKind::elementwise_mul, {{n}, {n}}, {n}, 0},
      {OpKind::scalar_mul, {{}, {n}}, {n}, 0},
      {OpKind::scalar_mul, {{n}}, {n}, 1.7},
      {OpKind::matvec, {{n, 2}, {2}}, {n}, 0},
      {OpKind::surrogate_threshold, {{n}, {n}}, {n}, 10.0},
      {OpKind::surrogate_threshold, {{n}}, {n}, 10.0},
  };
  for (const auto& c : cases) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::vector<double>> args;
      for (const auto& s : c.arg_shapes) {
        std::vector<double> a(oracle::product(s));
        for (auto& x : a) x = dist(rng);
        args.push_back(a);
      }
      std::vector<VertexId> ids(args.size());
      for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
      Vertex v{args.size(), c.op, "y", c.out_shape, ids, c.attr};
      std::vector<std::span<const double>> spans(args.begin(), args.end());
      const auto parts = local_partials<double>(v, spans);
      for (std::size_t which = 0; which < args.size(); ++which) {
        // Forward rule written with the smooth step, whose derivative is the surrogate.
        auto f = [&](const std::vector<double>& x) {
          auto a = args;
          a[which] = x;
          std::vector<double> y(oracle::product(c.out_shape));
          for (std::size_t i = 0; i < y.size(); ++i) {
            switch (c.op) {
              case OpKind::add: y[i] = a[0][i] + a[1][i]; break;
              case OpKind::subtract: y[i] = a[0][i] - a[1][i]; break;
              case OpKind::elementwise_mul: y[i] = a[0][i] * a[1][i]; break;
              case OpKind::scalar_mul: y[i] = a.size() == 2 ? a[0][0] * a[1][i] : c.attr * a[0][i]; break;
              case OpKind::matvec: y[i] = a[0][2 * i] * a[1][0] + a[0][2 * i + 1] * a[1][1]; break;
              case OpKind::surrogate_threshold:
                y[i] = smooth_step(a[0][i] - (a.size() == 2 ? a[1][i] : 0.0), c.attr);
                break;
              default: break;
            }
          }
          return y;
        };
        const auto fd = oracle::jacobian_fd(f, args[which], 1e-6);
        const auto got = oracle::expand(parts[which]);
        ASSERT_EQ(got.size(), fd.size());
        for (std::size_t i = 0; i < fd.size(); ++i)
          EXPECT_LE(std::abs(got[i] - fd[i]), 1e-6 * std::max(1.0, std::abs(fd[i]))) << op_name(c.op) << " arg " << which;
      }
    }
  }
}

TEST(Graph, NonDifferentiableInputsHaveNoEdges) {
  Program p{{{"x", {2}}, {"d", {2}, false}}, {{"y", OpKind::add, {"x", "d"}}}, {"y"}};
  const auto g = build_graph<double>(p);
  EXPECT_TRUE(g.has_edge(g.id_of("x"), g.id_of("y")));
  EXPECT_FALSE(g.has_edge(g.id_of("d"), g.id_of("y")));
}

}  // namespace
