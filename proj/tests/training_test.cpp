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

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace recmind {
namespace {

using testing::GradInstance;
using testing::make_grad_instance;

TrainConfig small_config() {
  TrainConfig c;
  c.dim = 4;
  c.layers = 2;
  c.lambda = 0.1;
  c.beta = 1e-4;
  c.tau = 0.2;
  return c;
}

TEST(Objective, WeightsZeroGiveBprOnly) {
  const auto inst = make_grad_instance(5, 6, 4, 3, 2, 1);
  auto c = small_config();
  c.lambda = 0;
  c.beta = 0;
  const auto l = total_loss(inst.batch, inst.graph, inst.params, inst.raw, c, Phase::kJoint);
  EXPECT_EQ(l.total, l.cf);
}

TEST(Objective, NoAlignmentGivesBprPlusReg) {
  const auto inst = make_grad_instance(5, 6, 4, 3, 2, 2);
  auto c = small_config();
  c.ablation.no_align_users = true;
  c.ablation.no_align_items = true;
  const auto l = total_loss(inst.batch, inst.graph, inst.params, inst.raw, c, Phase::kJoint);
  EXPECT_EQ(l.align_u, 0.0);
  EXPECT_EQ(l.align_i, 0.0);
  EXPECT_EQ(l.total, l.cf + c.beta * l.reg);
}

TEST(Objective, WarmupOptimizesAlignmentOnly) {
  const auto inst = make_grad_instance(5, 6, 4, 3, 2, 3);
  const auto c = small_config();
  const auto l = total_loss(inst.batch, inst.graph, inst.params, inst.raw, c, Phase::kWarmup);
  EXPECT_GT(l.cf, 0.0);
  EXPECT_EQ(l.total, c.lambda * (l.align_u + l.align_i));
}

// 2 users, 2 items, edges (u0, i0) and (u1, i1), d = 1, L = 1. Every
// degree is 1, so each degree feature is 1 and A_hat swaps the paired
// nodes. With d = 1 the cosine of two scalars is the product of signs.
TEST(Objective, ScalarInstanceByHand) {
  const auto g = build_graph({{0, 0}, {1, 1}}, 2, 2);
  ModelParams<double> p;
  p.base_embeddings.resize(4, 1);
  p.base_embeddings << 0.3, -0.5, 0.8, 0.2;  // u0 u1 i0 i1
  p.gate_weight.resize(3);
  p.gate_weight << 0.4, -0.6, 0.2;
  p.gate_bias = -0.1;
  p.alpha_logit = 0.3;
  p.projection.weight.resize(1, 1);
  p.projection.weight << 0.7;
  LanguageEmbeddingStore raw;
  raw.dim_in = 1;
  raw.vectors.resize(4, 1);
  raw.vectors << 1.0f, -2.0f, 0.5f, 1.5f;
  raw.has_text.assign(4, true);
  Batch batch;
  batch.users = {0, 1};
  batch.positives = {0, 1};
  batch.negatives = {{1}, {0}};
  TrainConfig c;
  c.dim = 1;
  c.layers = 1;
  c.tau = 0.5;
  c.lambda = 0.3;
  c.beta = 0.01;

  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const double e[4] = {0.3, -0.5, 0.8, 0.2};
  const double zl[4] = {0.7, -1.4, 0.35, 1.05};
  const int partner[4] = {2, 3, 0, 1};
  double fused[4], zg[4], h[4];
  for (int v = 0; v < 4; ++v) {
    const double gamma = sig(0.4 * e[v] - 0.6 * zl[v] + 0.2 * 1.0 - 0.1);
    fused[v] = gamma * e[v] + (1 - gamma) * zl[v];
  }
  const double a = sig(0.3);
  for (int v = 0; v < 4; ++v) {
    zg[v] = 0.5 * (e[v] + fused[partner[v]]);
    h[v] = a * zg[v] + (1 - a) * zl[v];
  }
  auto softplus_ref = [](double x) { return std::log1p(std::exp(x)); };
  const double cf = 0.5 * (softplus_ref(-(h[0] * h[2] - h[0] * h[3])) +
                           softplus_ref(-(h[1] * h[3] - h[1] * h[2])));
  auto sgn = [](double x) { return x > 0 ? 1.0 : -1.0; };
  // Two-entity symmetric InfoNCE on scalars.
  auto align = [&](int x, int y) {
    const double tau = 0.5;
    const double cg[2] = {sgn(zg[x]), sgn(zg[y])};
    const double cl[2] = {sgn(zl[x]), sgn(zl[y])};
    double dir1 = 0, dir2 = 0;
    for (int r = 0; r < 2; ++r) {
      dir1 += -cg[r] * cl[r] / tau +
              std::log(std::exp(cg[r] * cl[0] / tau) + std::exp(cg[r] * cl[1] / tau));
      dir2 += -cl[r] * cg[r] / tau +
              std::log(std::exp(cl[r] * cg[0] / tau) + std::exp(cl[r] * cg[1] / tau));
    }
    return 0.5 * (dir1 / 2 + dir2 / 2);
  };
  const double align_u = align(0, 1);
  const double align_i = align(2, 3);
  const double reg = 0.09 + 0.25 + 0.64 + 0.04 + (0.16 + 0.36 + 0.04) + 0.01 + 0.49;
  const double total = cf + 0.3 * (align_u + align_i) + 0.01 * reg;

  const auto l = total_loss(batch, g, p, raw, c, Phase::kJoint);
  EXPECT_NEAR(l.cf, cf, 1e-12);
  EXPECT_NEAR(l.align_u, align_u, 1e-12);
  EXPECT_NEAR(l.align_i, align_i, 1e-12);
  EXPECT_NEAR(l.reg, reg, 1e-12);
  EXPECT_NEAR(l.total, total, 1e-12);
}

class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, JointPhase) {
  const auto inst = make_grad_instance(4, 5, 3, 3, 2, static_cast<std::uint64_t>(GetParam()));
  const auto r = testing::finite_difference_check(inst, small_config(), Phase::kJoint);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_block;
}

TEST_P(GradientCheck, WarmupPhase) {
  const auto inst = make_grad_instance(4, 5, 3, 3, 1, 50 + static_cast<std::uint64_t>(GetParam()));
  const auto r = testing::finite_difference_check(inst, small_config(), Phase::kWarmup);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_block;
}

TEST_P(GradientCheck, WithQueueKeysAsConstants) {
  const auto inst = make_grad_instance(4, 5, 3, 3, 1, 80 + static_cast<std::uint64_t>(GetParam()));
  auto c = small_config();
  c.queue_size = 6;
  c.queue_momentum = 0.5;
  AlignmentQueues<double> q{MomentumQueue<double>(6, 0.5), MomentumQueue<double>(6, 0.5)};
  const auto zl = project(inst.raw, inst.params.projection);
  q.users.update({0, 1, 2}, testing::representation(inst.params, inst.graph, inst.raw, c)
                                .topRows(3)
                                .eval());
  q.items.update({4, 5}, zl.middleRows(4, 2).eval());
  const auto r = testing::finite_difference_check(inst, c, Phase::kJoint, 1e-6, 0, 0, &q);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_block;
}

TEST_P(GradientCheck, Ablations) {
  for (int mode = 0; mode < 3; ++mode) {
    const auto inst =
        make_grad_instance(4, 5, 3, 3, 1, 120 + static_cast<std::uint64_t>(GetParam()));
    auto c = small_config();
    if (mode == 0) c.ablation.llm_only = true;
    if (mode == 1) c.ablation.graph_only = true;
    if (mode == 2) c.ablation.no_align_items = true;
    const auto r = testing::finite_difference_check(inst, c, Phase::kJoint);
    EXPECT_LT(r.max_rel_error, 1e-4) << "mode " << mode << " " << r.worst_block;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradientCheck, ::testing::Range(0, 4));

TEST(Gradients, ProjectionOnlyThroughFusionWhenLambdaZero) {
  const auto inst = make_grad_instance(4, 5, 3, 3, 1, 7);
  auto c = small_config();
  c.lambda = 0;
  c.beta = 0;
  const auto general = compute_gradients(inst.batch, inst.graph, inst.params, inst.raw, c,
                                         Phase::kJoint);
  EXPECT_GT(general.projection.norm(), 0.0);
  c.ablation.graph_only = true;
  const auto pinned = compute_gradients(inst.batch, inst.graph, inst.params, inst.raw, c,
                                        Phase::kJoint);
  EXPECT_EQ(pinned.projection.norm(), 0.0);
  EXPECT_EQ(pinned.gate_weight.norm(), 0.0);
  EXPECT_EQ(pinned.alpha_logit, 0.0);
}

TEST(Gradients, FullBatchDescentIsMonotone) {
  const auto ds = synthetic::two_cluster();
  const auto graph = testing::graph_of(ds.split);
  TrainConfig c;
  c.dim = 8;
  c.layers = 2;
  c.lr = 0.01;
  auto params = init_params<double>(graph.num_nodes(), c.dim, ds.language.dim_in, 3);
  Batch batch;
  const auto items = ds.split.train_items_by_user();
  for (Index u = 0; u < ds.split.num_users(); ++u) {
    batch.users.push_back(u);
    batch.positives.push_back(items[static_cast<std::size_t>(u)].front());
    // Cross-cluster item as the negative.
    const int other = 1 - ds.user_cluster[static_cast<std::size_t>(u)];
    Index neg = 0;
    while (ds.item_cluster[static_cast<std::size_t>(neg)] != other) ++neg;
    batch.negatives.push_back({neg});
  }
  Optimizer<double> opt(c);
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 50; ++step) {
    const auto obj = evaluate_objective(batch, graph, params, ds.language, c, Phase::kJoint, true);
    EXPECT_LE(obj.loss.total, prev + 1e-9) << "step " << step;
    prev = obj.loss.total;
    opt.step(params, *obj.grads);
  }
}

TEST(Train, ZeroEpochsReturnsInit) {
  const auto ds = synthetic::two_cluster();
  const auto graph = testing::graph_of(ds.split);
  TrainConfig c;
  c.dim = 8;
  c.max_epochs = 0;
  const auto r = train<double>(ds.split, graph, ds.language, c);
  EXPECT_TRUE(r.log.empty());
  const auto init = init_params<double>(graph.num_nodes(), 8, ds.language.dim_in, c.seed);
  EXPECT_EQ(r.params.base_embeddings, init.base_embeddings);
  EXPECT_EQ(r.params.projection.weight, init.projection.weight);
}

std::vector<std::string> log_lines(const std::vector<EpochLog>& log) {
  std::vector<std::string> out;
  for (auto e : log) {
    e.wall_ms = 0;
    out.push_back(to_json(e).dump());
  }
  return out;
}

TEST(Train, SameSeedSameLog) {
  const auto ds = synthetic::two_cluster();
  const auto graph = testing::graph_of(ds.split);
  TrainConfig c;
  c.dim = 8;
  c.max_epochs = 8;
  c.warmup_epochs = 2;
  c.batch_users = 7;
  c.edge_dropout_rate = 0.2;
  c.embedding_dropout_rate = 0.1;
  c.queue_size = 5;
  const auto a = train<double>(ds.split, graph, ds.language, c);
  const auto b = train<double>(ds.split, graph, ds.language, c);
  EXPECT_EQ(log_lines(a.log), log_lines(b.log));
  EXPECT_EQ(a.params.base_embeddings, b.params.base_embeddings);
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  const auto ds = synthetic::two_cluster();
  const auto graph = testing::graph_of(ds.split);
  TrainConfig c;
  c.dim = 8;
  c.max_epochs = 6;
  c.warmup_epochs = 2;
  c.batch_users = 6;
  c.patience = 0;
  const auto full = train<double>(ds.split, graph, ds.language, c);
  auto first = c;
  first.max_epochs = 3;
  const auto part = train<double>(ds.split, graph, ds.language, first);
  const auto rest = train<double>(ds.split, graph, ds.language, c, part.state);
  ASSERT_EQ(rest.log.size(), 3u);
  EXPECT_EQ(rest.log.front().epoch, 3);
  EXPECT_EQ(rest.state.params.base_embeddings, full.state.params.base_embeddings);
  const auto full_lines = log_lines(full.log);
  EXPECT_EQ(log_lines(rest.log), std::vector<std::string>(full_lines.begin() + 3, full_lines.end()));
}

TEST(Train, EarlyStoppingAndPhases) {
  const auto ds = synthetic::two_cluster();
  const auto graph = testing::graph_of(ds.split);
  TrainConfig c;
  c.dim = 8;
  c.max_epochs = 200;
  c.warmup_epochs = 3;
  c.patience = 2;
  c.lr = 1e-9;  // nothing improves after the first joint epoch
  const auto r = train<double>(ds.split, graph, ds.language, c);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_LT(r.log.size(), 200u);
  for (const auto& e : r.log) {
    EXPECT_EQ(e.phase, e.epoch < 3 ? "warmup" : "joint");
    EXPECT_EQ(e.val_ndcg10.has_value(), e.epoch >= 3);
  }
}

TEST(Train, F32PathRuns) {
  const auto ds = synthetic::two_cluster();
  const auto graph = testing::graph_of(ds.split);
  TrainConfig c;
  c.dim = 8;
  c.max_epochs = 4;
  c.warmup_epochs = 1;
  c.precision = "f32";
  const auto r = train<float>(ds.split, graph, ds.language, c);
  EXPECT_EQ(r.log.size(), 4u);
  EXPECT_TRUE(r.params.all_finite());
}

TEST(Config, JsonRoundTripAndValidation) {
  TrainConfig c;
  c.lambda = 0.25;
  c.ablation.no_align_items = true;
  c.optimizer = OptimizerKind::kAdam;
  const auto back = train_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_THROW(train_config_from_json({{"tau", 0.0}}), Error);
  EXPECT_THROW(train_config_from_json({{"lambda", -1.0}}), Error);
  EXPECT_THROW(train_config_from_json({{"queue_momentum", 1.0}}), Error);
  EXPECT_THROW(train_config_from_json({{"bogus", 1}}), Error);
  EXPECT_EQ(TrainConfig{}.effective_layers(), 2);
  TrainConfig llm;
  llm.ablation.llm_only = true;
  EXPECT_EQ(llm.effective_layers(), 0);
  EXPECT_EQ(*fusion_options<double>(llm).pinned_alpha, 0.0);
}

}  // namespace
}  // namespace recmind
