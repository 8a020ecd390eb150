// Copyright 2026 The RecMind Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace recmind {
namespace {

TEST(Gate, ZeroWeightsGiveHalf) {
  const std::vector<double> state = {0.3, -1}, zl = {2, 5};
  EXPECT_DOUBLE_EQ(gate<double>(state, zl, 0.7, VectorXd::Zero(5), 0.0), 0.5);
}

TEST(Gate, LargeBiasSaturatesTowardOne) {
  const std::vector<double> state = {0.3}, zl = {2};
  EXPECT_GT(gate<double>(state, zl, 0.0, VectorXd::Zero(3), 40.0), 1 - 1e-15);
}

TEST(Gate, HandEvaluatedSigmoid) {
  VectorXd w = VectorXd::Zero(5);
  w[0] = 1;
  const std::vector<double> state = {std::log(3.0), 0}, zl = {9, 9};
  EXPECT_NEAR(gate<double>(state, zl, 0.4, w, 0.0), 0.75, 1e-15);
}

TEST(Gate, DimensionMismatch) {
  const std::vector<double> state = {1, 2}, zl = {1};
  EXPECT_THROW(gate<double>(state, zl, 0.0, VectorXd::Zero(5), 0.0), Error);
}

TEST(Forward, TwoNodeScalarHandComputation) {
  const auto g = build_graph({{0, 0}}, 1, 1);
  ModelParams<double> p;
  p.base_embeddings.resize(2, 1);
  p.base_embeddings << 0.4, -0.7;
  p.gate_weight.resize(3);
  p.gate_weight << 0.5, -1.2, 0.3;
  p.gate_bias = 0.1;
  p.alpha_logit = 0.6;
  p.projection.weight = MatrixXd::Identity(1, 1);
  MatrixXd zl(2, 1);
  zl << 1.5, 0.2;

  // Degrees are both 1, so the degree feature is log2/log2 = 1.
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const double gu = sig(0.5 * 0.4 - 1.2 * 1.5 + 0.3 + 0.1);
  const double gi = sig(0.5 * -0.7 - 1.2 * 0.2 + 0.3 + 0.1);
  const double fu = gu * 0.4 + (1 - gu) * 1.5;
  const double fi = gi * -0.7 + (1 - gi) * 0.2;
  const double zgu = (0.4 + fi) / 2, zgi = (-0.7 + fu) / 2;
  const double a = sig(0.6);
  const double hu = a * zgu + (1 - a) * 1.5;
  const double hi = a * zgi + (1 - a) * 0.2;

  const auto t = forward(g, p, zl, 1);
  EXPECT_NEAR(t.h(0, 0), hu, 1e-15);
  EXPECT_NEAR(t.h(1, 0), hi, 1e-15);
  EXPECT_NEAR(t.gates[0][0], gu, 1e-15);
  EXPECT_NEAR(score(t.h, 0, 1), hu * hi, 1e-15);
}

TEST(Forward, ZeroLayers) {
  const auto g = build_graph({{0, 0}, {1, 1}}, 2, 2);
  auto p = init_params<double>(4, 3, 3, 5);
  const MatrixXd zl = MatrixXd::Random(4, 3);
  const auto t = forward(g, p, zl, 0);
  EXPECT_LE((t.zg - p.base_embeddings).cwiseAbs().maxCoeff(), 0.0);
  const MatrixXd expected = 0.5 * p.base_embeddings + 0.5 * zl;
  EXPECT_LE((t.h - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Forward, LanguageOnlyReduction) {
  std::mt19937_64 rng(4);
  const auto g = build_graph(testing::random_edges(4, 5, 0.5, rng), 4, 5);
  const auto p = init_params<double>(9, 3, 3, 5);
  const MatrixXd zl = MatrixXd::Random(9, 3);
  ForwardOptions<double> o;
  o.pinned_alpha = 0.0;
  EXPECT_EQ(forward(g, p, zl, 0, o).h, zl);
}

TEST(Forward, EqualViewsMatchLightGcnFirstLayer) {
  std::mt19937_64 rng(5);
  const auto edges = testing::random_edges(4, 6, 0.5, rng);
  const auto g = build_graph(edges, 4, 6);
  auto p = init_params<double>(10, 3, 3, 6);
  p.gate_weight = VectorXd::Random(7);
  const MatrixXd zl = p.base_embeddings;
  const auto t = forward(g, p, zl, 1);
  const auto a = testing::dense_normalized_adjacency(edges, 4, 6);
  EXPECT_LE((t.layers[1] - a * p.base_embeddings).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Forward, PinnedGatesAndAlphaMatchPlainLightGcn) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Index nu = 3 + static_cast<Index>(seed % 5), ni = 4 + static_cast<Index>(seed % 3);
    const auto edges = testing::random_edges(nu, ni, 0.4, rng);
    const auto g = build_graph(edges, nu, ni);
    auto p = init_params<double>(nu + ni, 4, 6, seed);
    p.gate_weight = VectorXd::Random(9);
    const MatrixXd zl = MatrixXd::Random(nu + ni, 4);
    ForwardOptions<double> o;
    o.pin_gates_open = true;
    o.pinned_alpha = 1.0;
    const auto t = forward(g, p, zl, 3, o);
    const auto expected = testing::plain_lightgcn(
        testing::dense_normalized_adjacency(edges, nu, ni), p.base_embeddings, 3);
    EXPECT_LE((t.h - expected).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Forward, GateRange) {
  std::mt19937_64 rng(8);
  const auto g = build_graph(testing::random_edges(6, 6, 0.4, rng), 6, 6);
  auto p = init_params<double>(12, 4, 4, 1);
  p.gate_weight = VectorXd::Random(9);
  p.gate_bias = 0.7;
  const auto t = forward(g, p, MatrixXd::Random(12, 4).eval(), 2);
  for (const auto& gamma : t.gates) {
    EXPECT_GE(gamma.minCoeff(), 1e-12);
    EXPECT_LE(gamma.maxCoeff(), 1 - 1e-12);
  }
  EXPECT_GT(t.alpha, 0.0);
  EXPECT_LT(t.alpha, 1.0);
}

TEST(Forward, PermutationEquivariance) {
  std::mt19937_64 rng(12);
  const Index nu = 5, ni = 7;
  const auto edges = testing::random_edges(nu, ni, 0.4, rng);
  auto p = init_params<double>(nu + ni, 3, 3, 2);
  p.gate_weight = VectorXd::Random(7);
  const MatrixXd zl = MatrixXd::Random(nu + ni, 3);
  const auto base = forward(build_graph(edges, nu, ni), p, zl, 2).h;

  std::vector<Index> pu(static_cast<std::size_t>(nu)), pi(static_cast<std::size_t>(ni));
  std::iota(pu.begin(), pu.end(), 0);
  std::iota(pi.begin(), pi.end(), 0);
  std::shuffle(pu.begin(), pu.end(), rng);
  std::shuffle(pi.begin(), pi.end(), rng);
  auto node = [&](Index v) {
    return v < nu ? pu[static_cast<std::size_t>(v)] : nu + pi[static_cast<std::size_t>(v - nu)];
  };
  std::vector<std::pair<Index, Index>> permuted;
  for (const auto& [u, i] : edges) {
    permuted.emplace_back(pu[static_cast<std::size_t>(u)], pi[static_cast<std::size_t>(i)]);
  }
  ModelParams<double> q = p;
  MatrixXd zq(nu + ni, 3);
  for (Index v = 0; v < nu + ni; ++v) {
    q.base_embeddings.row(node(v)) = p.base_embeddings.row(v);
    zq.row(node(v)) = zl.row(v);
  }
  const auto moved = forward(build_graph(permuted, nu, ni), q, zq, 2).h;
  for (Index v = 0; v < nu + ni; ++v) {
    EXPECT_LE((moved.row(node(v)) - base.row(v)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Forward, MismatchAndNonFiniteErrors) {
  const auto g = build_graph({{0, 0}}, 1, 1);
  auto p = init_params<double>(2, 2, 2, 1);
  EXPECT_THROW(forward(g, p, MatrixXd::Zero(3, 2).eval(), 1), Error);
  p.base_embeddings(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(forward(g, p, MatrixXd::Zero(2, 2).eval(), 1), Error);
}

TEST(Score, Examples) {
  MatrixXd h(3, 2);
  h << 1, 0, 0, 1, 3, -1;
  EXPECT_EQ(score(h, 0, 0), 1.0);
  EXPECT_EQ(score(h, 0, 1), 0.0);
  MatrixXd g(2, 2);
  g << 1, 2, 3, -1;
  EXPECT_EQ(score(g, 0, 1), 1.0);
  EXPECT_EQ(score(g, 0, 1), score(g, 1, 0));
}

TEST(ScoreBatch, MatchesScalarPath) {
  const MatrixXd h = MatrixXd::Random(5, 3);
  const std::vector<Index> items = {2, 4, 1};
  const auto s = score_batch(h, 0, items);
  ASSERT_EQ(s.size(), 3);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(s[static_cast<Index>(k)], score(h, 0, items[k]));
  EXPECT_EQ(score_batch(h, 0, std::span<const Index>{}).size(), 0);
  const std::vector<Index> one = {3};
  EXPECT_EQ(score_batch(h, 1, one)[0], score(h, 1, 3));
}

TEST(Params, InitScaleAndCast) {
  const auto p = init_params<double>(2000, 16, 8, 3);
  const double sd = std::sqrt(p.base_embeddings.squaredNorm() / static_cast<double>(p.base_embeddings.size()));
  EXPECT_NEAR(sd, 0.1 / 4.0, 0.001);
  EXPECT_EQ(p.gate_weight.size(), 33);
  EXPECT_EQ(p.alpha(), 0.5);
  const auto f = p.cast<float>();
  EXPECT_EQ(f.base_embeddings(3, 4), static_cast<float>(p.base_embeddings(3, 4)));
}

}  // namespace
}  // namespace recmind
