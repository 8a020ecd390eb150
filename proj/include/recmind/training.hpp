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

// Composite objective
//   L = BPR + lambda * (InfoNCE_users + InfoNCE_items) + beta * Omega
// with its exact gradient, and the warm-up/joint training schedule with
// early stopping on validation NDCG@10.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "recmind/dataset.hpp"
#include "recmind/embed.hpp"
#include "recmind/eval.hpp"
#include "recmind/graph.hpp"
#include "recmind/loss.hpp"
#include "recmind/model.hpp"
#include "recmind/queue.hpp"
#include "recmind/sampling.hpp"
#include "recmind/types.hpp"

namespace recmind {

enum class OptimizerKind { kSgd, kAdam };

inline std::string to_string(OptimizerKind k) {
  return k == OptimizerKind::kSgd ? "sgd" : "adam";
}

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw Error("unknown optimizer '" + s + "'");
}

struct Ablation {
  // Score with z_L only: alpha pinned to 0 and no propagation.
  bool llm_only = false;
  bool no_align_users = false;
  bool no_align_items = false;
  // Gates pinned to 1 and alpha pinned to 1: plain LightGCN scoring.
  bool graph_only = false;

  bool operator==(const Ablation&) const = default;
};

struct TrainConfig {
  int dim = 64;
  int layers = 2;
  double lr = 0.05;
  double tau = 0.2;
  double lambda = 0.1;
  double beta = 1e-4;
  int n_negatives = 1;
  NegativeSampling neg_sampling = NegativeSampling::kPopularity;
  double popularity_exponent = 0.75;
  int batch_users = 1024;
  int warmup_epochs = 5;
  int max_epochs = 100;
  // Post-warm-up epochs without validation improvement before stopping;
  // 0 disables early stopping.
  int patience = 10;
  int queue_size = 0;
  double queue_momentum = 0.99;
  double edge_dropout_rate = 0.0;
  double embedding_dropout_rate = 0.0;
  std::uint64_t seed = 42;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  Ablation ablation;
  // "f64" or "f32"; selects the scalar type used for training math.
  std::string precision = "f64";
  Index validation_negatives = 100;

  void validate() const {
    if (!(tau > 0)) throw Error("config: tau must be > 0");
    if (lambda < 0 || beta < 0) throw Error("config: lambda and beta must be >= 0");
    if (!(queue_momentum >= 0 && queue_momentum < 1)) {
      throw Error("config: queue_momentum must lie in [0, 1)");
    }
    if (dim < 1 || layers < 0) throw Error("config: bad dim or layers");
    if (n_negatives < 1) throw Error("config: n_negatives must be >= 1");
    if (batch_users < 1) throw Error("config: batch_users must be >= 1");
    if (!(edge_dropout_rate >= 0 && edge_dropout_rate < 1) ||
        !(embedding_dropout_rate >= 0 && embedding_dropout_rate < 1)) {
      throw Error("config: dropout rates must lie in [0, 1)");
    }
    if (precision != "f64" && precision != "f32") {
      throw Error("config: precision must be f64 or f32");
    }
    if (ablation.llm_only && ablation.graph_only) {
      throw Error("config: llm_only and graph_only are exclusive");
    }
  }

  int effective_layers() const { return ablation.llm_only ? 0 : layers; }
};

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["dim"] = c.dim;
  j["layers"] = c.layers;
  j["lr"] = c.lr;
  j["tau"] = c.tau;
  j["lambda"] = c.lambda;
  j["beta"] = c.beta;
  j["n_negatives"] = c.n_negatives;
  j["neg_sampling"] = to_string(c.neg_sampling);
  j["popularity_exponent"] = c.popularity_exponent;
  j["batch_users"] = c.batch_users;
  j["warmup_epochs"] = c.warmup_epochs;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["queue_size"] = c.queue_size;
  j["queue_momentum"] = c.queue_momentum;
  j["edge_dropout_rate"] = c.edge_dropout_rate;
  j["embedding_dropout_rate"] = c.embedding_dropout_rate;
  j["seed"] = c.seed;
  j["optimizer"] = to_string(c.optimizer);
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_epsilon"] = c.adam_epsilon;
  j["ablation"] = {{"llm_only", c.ablation.llm_only},
                   {"no_align_users", c.ablation.no_align_users},
                   {"no_align_items", c.ablation.no_align_items},
                   {"graph_only", c.ablation.graph_only}};
  j["precision"] = c.precision;
  j["validation_negatives"] = c.validation_negatives;
  return j;
}

// Missing keys keep their defaults; unknown keys are rejected.
inline TrainConfig train_config_from_json(const nlohmann::json& j,
                                          TrainConfig c = {}) {
  static const std::unordered_set<std::string> kKnown = {
      "dim", "layers", "lr", "tau", "lambda", "beta", "n_negatives",
      "neg_sampling", "popularity_exponent", "batch_users", "warmup_epochs",
      "max_epochs", "patience", "queue_size", "queue_momentum",
      "edge_dropout_rate", "embedding_dropout_rate", "seed", "optimizer",
      "adam_beta1", "adam_beta2", "adam_epsilon", "ablation", "precision",
      "validation_negatives"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.contains(key)) throw Error("config: unknown key '" + key + "'");
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("dim", c.dim);
  get("layers", c.layers);
  get("lr", c.lr);
  get("tau", c.tau);
  get("lambda", c.lambda);
  get("beta", c.beta);
  get("n_negatives", c.n_negatives);
  if (j.contains("neg_sampling")) {
    c.neg_sampling = negative_sampling_from_string(j["neg_sampling"].get<std::string>());
  }
  get("popularity_exponent", c.popularity_exponent);
  get("batch_users", c.batch_users);
  get("warmup_epochs", c.warmup_epochs);
  get("max_epochs", c.max_epochs);
  get("patience", c.patience);
  get("queue_size", c.queue_size);
  get("queue_momentum", c.queue_momentum);
  get("edge_dropout_rate", c.edge_dropout_rate);
  get("embedding_dropout_rate", c.embedding_dropout_rate);
  get("seed", c.seed);
  if (j.contains("optimizer")) {
    c.optimizer = optimizer_from_string(j["optimizer"].get<std::string>());
  }
  get("adam_beta1", c.adam_beta1);
  get("adam_beta2", c.adam_beta2);
  get("adam_epsilon", c.adam_epsilon);
  if (j.contains("ablation")) {
    const auto& a = j["ablation"];
    c.ablation.llm_only = a.value("llm_only", c.ablation.llm_only);
    c.ablation.no_align_users = a.value("no_align_users", c.ablation.no_align_users);
    c.ablation.no_align_items = a.value("no_align_items", c.ablation.no_align_items);
    c.ablation.graph_only = a.value("graph_only", c.ablation.graph_only);
  }
  get("precision", c.precision);
  get("validation_negatives", c.validation_negatives);
  c.validate();
  return c;
}

inline std::string config_hash(const TrainConfig& c) {
  return short_hash(to_json(c).dump());
}

template <typename Scalar>
ForwardOptions<Scalar> fusion_options(const TrainConfig& c) {
  ForwardOptions<Scalar> o;
  if (c.ablation.llm_only) o.pinned_alpha = Scalar(0);
  if (c.ablation.graph_only) {
    o.pin_gates_open = true;
    o.pinned_alpha = Scalar(1);
  }
  return o;
}

enum class Phase { kWarmup, kJoint };

inline std::string to_string(Phase p) {
  return p == Phase::kWarmup ? "warmup" : "joint";
}

// Users and items are local indices. negatives[b] holds n items.
struct Batch {
  std::vector<Index> users;
  std::vector<Index> positives;
  std::vector<std::vector<Index>> negatives;

  std::size_t size() const { return users.size(); }
};

template <typename Scalar>
struct LossComponents {
  Scalar cf = 0;
  Scalar align_u = 0;
  Scalar align_i = 0;
  Scalar reg = 0;
  Scalar total = 0;  // the optimized objective for the phase
};

template <typename Scalar>
struct AlignmentQueues {
  MomentumQueue<Scalar> users;
  MomentumQueue<Scalar> items;
};

template <typename Scalar>
struct ObjectiveResult {
  LossComponents<Scalar> loss;
  std::optional<ModelGrads<Scalar>> grads;
  // Joint node ids fed to each alignment term, for queue maintenance.
  std::vector<Index> aligned_users;
  std::vector<Index> aligned_items;
  Matrix<Scalar> zl;
};

namespace detail {

inline void push_unique(std::vector<Index>& out, std::unordered_set<Index>& seen,
                        Index v) {
  if (seen.insert(v).second) out.push_back(v);
}

template <typename Scalar>
Matrix<Scalar> gather_rows(const Matrix<Scalar>& m, const std::vector<Index>& rows) {
  Matrix<Scalar> out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Index>(k)) = m.row(rows[k]);
  }
  return out;
}

// Entities whose two views both have nonzero norm (cosine is defined).
template <typename Scalar>
std::vector<Index> alignable(const std::vector<Index>& nodes,
                             const Matrix<Scalar>& zg, const Matrix<Scalar>& zl) {
  std::vector<Index> out;
  for (Index v : nodes) {
    if (zg.row(v).squaredNorm() > 0 && zl.row(v).squaredNorm() > 0) out.push_back(v);
  }
  return out;
}

}  // namespace detail

// Evaluates the objective on one batch and, when want_grad is set, its exact
// gradient with respect to every trainable block. In the warm-up phase the
// optimized total is the alignment term alone; the CF term is still
// reported. Queue keys enter only as constants.
template <typename Scalar>
ObjectiveResult<Scalar> evaluate_objective(
    const Batch& batch, const InteractionGraph& graph,
    const ModelParams<Scalar>& params, const LanguageEmbeddingStore& raw,
    const TrainConfig& config, Phase phase, bool want_grad,
    const AlignmentQueues<Scalar>* queues = nullptr,
    const ForwardOptions<Scalar>* options_override = nullptr) {
  const Index nu = graph.num_users;
  const Index d = params.dim();
  const ForwardOptions<Scalar> options =
      options_override ? *options_override : fusion_options<Scalar>(config);
  const Scalar lambda = static_cast<Scalar>(config.lambda);
  const Scalar beta = static_cast<Scalar>(config.beta);

  ObjectiveResult<Scalar> result;
  result.zl = project(raw, params.projection);
  const auto trace = forward(graph, params, result.zl, config.effective_layers(),
                             options, /*capture_trace=*/want_grad);
  const auto& h = trace.h;
  const Index n_nodes = graph.num_nodes();

  // Collaborative term.
  const Index b = static_cast<Index>(batch.size());
  const Index n = b > 0 ? static_cast<Index>(batch.negatives.front().size()) : 0;
  Vector<Scalar> s_pos(b);
  Matrix<Scalar> s_neg(b, n);
  for (Index r = 0; r < b; ++r) {
    const auto& negs = batch.negatives[static_cast<std::size_t>(r)];
    if (static_cast<Index>(negs.size()) != n) {
      throw Error("batch: every user needs the same number of negatives");
    }
    const Index u = batch.users[static_cast<std::size_t>(r)];
    s_pos[r] = score(h, u, nu + batch.positives[static_cast<std::size_t>(r)]);
    for (Index k = 0; k < n; ++k) s_neg(r, k) = score(h, u, nu + negs[static_cast<std::size_t>(k)]);
  }
  const auto bpr = bpr_loss_with_grad(s_pos, s_neg);
  result.loss.cf = bpr.loss;
  const bool use_cf = phase == Phase::kJoint;

  // Alignment terms over batch users and the items the batch touches.
  std::vector<Index> user_nodes, item_nodes;
  {
    std::unordered_set<Index> seen;
    for (Index u : batch.users) detail::push_unique(user_nodes, seen, u);
    for (std::size_t r = 0; r < batch.size(); ++r) {
      detail::push_unique(item_nodes, seen, nu + batch.positives[r]);
      for (Index i : batch.negatives[r]) detail::push_unique(item_nodes, seen, nu + i);
    }
  }
  Matrix<Scalar> d_zg, d_zl;
  if (want_grad) {
    d_zg = Matrix<Scalar>::Zero(n_nodes, d);
    d_zl = Matrix<Scalar>::Zero(n_nodes, d);
  }
  auto align = [&](const std::vector<Index>& nodes, const MomentumQueue<Scalar>* queue,
                   std::vector<Index>& used) -> Scalar {
    used = detail::alignable(nodes, trace.zg, result.zl);
    if (used.empty()) return Scalar(0);
    const auto zg_rows = detail::gather_rows(trace.zg, used);
    const auto zl_rows = detail::gather_rows(result.zl, used);
    const auto r = infonce_align_with_grad(zg_rows, zl_rows, static_cast<Scalar>(config.tau),
                                           queue, std::span<const Index>(used));
    if (want_grad) {
      for (std::size_t k = 0; k < used.size(); ++k) {
        d_zg.row(used[k]) += lambda * r.d_zg.row(static_cast<Index>(k));
        d_zl.row(used[k]) += lambda * r.d_zl.row(static_cast<Index>(k));
      }
    }
    return r.loss;
  };
  const bool queue_on = queues != nullptr && config.queue_size > 0;
  if (!config.ablation.no_align_users) {
    result.loss.align_u =
        align(user_nodes, queue_on ? &queues->users : nullptr, result.aligned_users);
  }
  if (!config.ablation.no_align_items) {
    result.loss.align_i =
        align(item_nodes, queue_on ? &queues->items : nullptr, result.aligned_items);
  }

  // Omega: squared L2 of touched base rows plus the global blocks in use.
  std::vector<Index> touched = user_nodes;
  touched.insert(touched.end(), item_nodes.begin(), item_nodes.end());
  const bool gates_used = !options.pin_gates_open && config.effective_layers() > 0;
  Scalar reg = 0;
  for (Index v : touched) reg += params.base_embeddings.row(v).squaredNorm();
  if (gates_used) {
    reg += params.gate_weight.squaredNorm() + params.gate_bias * params.gate_bias;
  }
  reg += params.projection.weight.squaredNorm();
  result.loss.reg = reg;

  const Scalar align_total = lambda * (result.loss.align_u + result.loss.align_i);
  result.loss.total = use_cf ? result.loss.cf + align_total + beta * reg : align_total;

  if (!want_grad) return result;

  Matrix<Scalar> dh = Matrix<Scalar>::Zero(n_nodes, d);
  if (use_cf) {
    for (Index r = 0; r < b; ++r) {
      const Index u = batch.users[static_cast<std::size_t>(r)];
      const Index p = nu + batch.positives[static_cast<std::size_t>(r)];
      dh.row(u) += bpr.d_pos[r] * h.row(p);
      dh.row(p) += bpr.d_pos[r] * h.row(u);
      const auto& negs = batch.negatives[static_cast<std::size_t>(r)];
      for (Index k = 0; k < n; ++k) {
        const Index q = nu + negs[static_cast<std::size_t>(k)];
        dh.row(u) += bpr.d_neg(r, k) * h.row(q);
        dh.row(q) += bpr.d_neg(r, k) * h.row(u);
      }
    }
  }
  auto grads = backward(graph, params, trace, options, dh, d_zg, d_zl);
  if (params.projection.trainable) {
    grads.projection = grads.zl.transpose() * raw.vectors.cast<Scalar>();
  } else {
    grads.projection = Matrix<Scalar>::Zero(params.projection.weight.rows(),
                                            params.projection.weight.cols());
  }
  if (!gates_used) {
    grads.gate_weight.setZero();
    grads.gate_bias = 0;
  }
  if (use_cf && beta > 0) {
    for (Index v : touched) {
      grads.base_embeddings.row(v) += 2 * beta * params.base_embeddings.row(v);
    }
    if (gates_used) {
      grads.gate_weight += 2 * beta * params.gate_weight;
      grads.gate_bias += 2 * beta * params.gate_bias;
    }
    if (params.projection.trainable) {
      grads.projection += 2 * beta * params.projection.weight;
    }
  }
  auto check = [](bool ok, const char* name) {
    if (!ok) throw Error(std::string("non-finite gradient in ") + name);
  };
  check(grads.base_embeddings.allFinite(), "base_embeddings");
  check(grads.gate_weight.allFinite(), "gate_weight");
  check(std::isfinite(grads.gate_bias), "gate_bias");
  check(std::isfinite(grads.alpha_logit), "alpha_logit");
  check(grads.projection.allFinite(), "projection");
  result.grads = std::move(grads);
  return result;
}

template <typename Scalar>
LossComponents<Scalar> total_loss(const Batch& batch, const InteractionGraph& graph,
                                  const ModelParams<Scalar>& params,
                                  const LanguageEmbeddingStore& raw,
                                  const TrainConfig& config, Phase phase,
                                  const AlignmentQueues<Scalar>* queues = nullptr) {
  return evaluate_objective(batch, graph, params, raw, config, phase, false, queues).loss;
}

template <typename Scalar>
ModelGrads<Scalar> compute_gradients(const Batch& batch, const InteractionGraph& graph,
                                     const ModelParams<Scalar>& params,
                                     const LanguageEmbeddingStore& raw,
                                     const TrainConfig& config, Phase phase,
                                     const AlignmentQueues<Scalar>* queues = nullptr) {
  return *evaluate_objective(batch, graph, params, raw, config, phase, true, queues).grads;
}

// ---------------------------------------------------------------------------
// Optimizers

template <typename Scalar>
class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& c) : config_(c) {}

  void step(ModelParams<Scalar>& p, const ModelGrads<Scalar>& g) {
    const Scalar lr = static_cast<Scalar>(config_.lr);
    if (config_.optimizer == OptimizerKind::kSgd) {
      p.base_embeddings -= lr * g.base_embeddings;
      p.gate_weight -= lr * g.gate_weight;
      p.gate_bias -= lr * g.gate_bias;
      p.alpha_logit -= lr * g.alpha_logit;
      if (p.projection.trainable) p.projection.weight -= lr * g.projection;
      return;
    }
    if (!initialized_) {
      m_base_ = Matrix<Scalar>::Zero(g.base_embeddings.rows(), g.base_embeddings.cols());
      v_base_ = m_base_;
      m_gate_ = Vector<Scalar>::Zero(g.gate_weight.size());
      v_gate_ = m_gate_;
      m_proj_ = Matrix<Scalar>::Zero(g.projection.rows(), g.projection.cols());
      v_proj_ = m_proj_;
      initialized_ = true;
    }
    ++t_;
    const Scalar b1 = static_cast<Scalar>(config_.adam_beta1);
    const Scalar b2 = static_cast<Scalar>(config_.adam_beta2);
    const Scalar eps = static_cast<Scalar>(config_.adam_epsilon);
    const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(t_));
    const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(t_));
    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
      m = b1 * m + (Scalar(1) - b1) * grad;
      v = b2 * v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    auto update_scalar = [&](Scalar& param, Scalar grad, Scalar& m, Scalar& v) {
      m = b1 * m + (Scalar(1) - b1) * grad;
      v = b2 * v + (Scalar(1) - b2) * grad * grad;
      param -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
    };
    update(p.base_embeddings, g.base_embeddings, m_base_, v_base_);
    update(p.gate_weight, g.gate_weight, m_gate_, v_gate_);
    update_scalar(p.gate_bias, g.gate_bias, m_bias_, v_bias_);
    update_scalar(p.alpha_logit, g.alpha_logit, m_alpha_, v_alpha_);
    if (p.projection.trainable) update(p.projection.weight, g.projection, m_proj_, v_proj_);
  }

  // Drops Adam moments and the step count; a no-op for SGD.
  void reset() {
    initialized_ = false;
    t_ = 0;
    m_bias_ = v_bias_ = m_alpha_ = v_alpha_ = 0;
  }

 private:
  TrainConfig config_;
  bool initialized_ = false;
  long t_ = 0;
  Matrix<Scalar> m_base_, v_base_, m_proj_, v_proj_;
  Vector<Scalar> m_gate_, v_gate_;
  Scalar m_bias_ = 0, v_bias_ = 0, m_alpha_ = 0, v_alpha_ = 0;
};

// ---------------------------------------------------------------------------
// Schedule

struct EpochLog {
  int epoch = 0;
  std::string phase;
  double cf = 0;
  double align_u = 0;
  double align_i = 0;
  double reg = 0;
  double total = 0;
  std::optional<double> val_ndcg10;
  double wall_ms = 0;
};

inline nlohmann::ordered_json to_json(const EpochLog& e) {
  nlohmann::ordered_json j;
  j["epoch"] = e.epoch;
  j["phase"] = e.phase;
  j["cf"] = e.cf;
  j["align_u"] = e.align_u;
  j["align_i"] = e.align_i;
  j["reg"] = e.reg;
  j["total"] = e.total;
  j["val_ndcg10"] = e.val_ndcg10 ? nlohmann::ordered_json(*e.val_ndcg10)
                                 : nlohmann::ordered_json(nullptr);
  j["wall_ms"] = e.wall_ms;
  return j;
}

template <typename Scalar>
struct TrainState {
  ModelParams<Scalar> params;
  ModelParams<Scalar> best_params;
  int epoch = 0;  // next epoch to run
  double best_validation_ndcg10 = -1.0;
  int epochs_since_improvement = 0;
  std::string rng_state;  // serialized std::mt19937_64; empty = fresh
  bool has_best = false;

  Phase phase(int warmup_epochs) const {
    return epoch < warmup_epochs ? Phase::kWarmup : Phase::kJoint;
  }
};

template <typename Scalar>
struct TrainResult {
  ModelParams<Scalar> params;  // best checkpoint (or final when none)
  std::vector<EpochLog> log;
  TrainState<Scalar> state;
  bool stopped_early = false;
};

template <typename Scalar>
TrainState<Scalar> initial_state(const InteractionGraph& graph,
                                 const LanguageEmbeddingStore& raw,
                                 const TrainConfig& config) {
  TrainState<Scalar> s;
  s.params = init_params<Scalar>(graph.num_nodes(), config.dim, raw.dim_in,
                                 config.seed);
  s.best_params = s.params;
  return s;
}

// Mean cosine between z_G and z_L over entities where both are nonzero.
template <typename Scalar>
double mean_view_cosine(const InteractionGraph& graph, const ModelParams<Scalar>& params,
                        const LanguageEmbeddingStore& raw, const TrainConfig& config) {
  const auto zl = project(raw, params.projection);
  const auto trace = forward(graph, params, zl, config.effective_layers(),
                             fusion_options<Scalar>(config), false);
  double sum = 0;
  Index count = 0;
  for (Index v = 0; v < zl.rows(); ++v) {
    const double a = static_cast<double>(trace.zg.row(v).norm());
    const double b = static_cast<double>(zl.row(v).norm());
    if (a > 0 && b > 0) {
      sum += static_cast<double>(trace.zg.row(v).dot(zl.row(v))) / (a * b);
      ++count;
    }
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

using EpochCallback = std::function<void(const EpochLog&)>;

// Runs epochs [state.epoch, max_epochs). Each epoch visits every user with
// training items once, in a shuffled order, with one uniformly drawn
// positive and n negatives per visit. Warm-up epochs optimize alignment
// only; each later epoch is followed by validation NDCG@10 and early
// stopping bookkeeping.
template <typename Scalar>
TrainResult<Scalar> train(const DatasetSplit& split, const InteractionGraph& graph,
                          const LanguageEmbeddingStore& raw, const TrainConfig& config,
                          std::optional<TrainState<Scalar>> resume = std::nullopt,
                          const EpochCallback& on_epoch = {}) {
  config.validate();
  if (graph.num_users != split.num_users() || graph.num_items != split.num_items() ||
      raw.num_entities() != graph.num_nodes()) {
    throw Error("train: split, graph and embedding store disagree on entity counts");
  }
  TrainResult<Scalar> result;
  result.state = resume ? std::move(*resume) : initial_state<Scalar>(graph, raw, config);
  auto& st = result.state;
  std::mt19937_64 rng(config.seed ^ 0x5DEECE66DULL);
  if (!st.rng_state.empty()) {
    std::istringstream in(st.rng_state);
    in >> rng;
  }

  const auto items_by_user = split.train_items_by_user();
  std::vector<std::unordered_set<Index>> positive_sets(items_by_user.size());
  std::vector<Index> active_users;
  for (std::size_t u = 0; u < items_by_user.size(); ++u) {
    positive_sets[u].insert(items_by_user[u].begin(), items_by_user[u].end());
    if (!items_by_user[u].empty()) active_users.push_back(static_cast<Index>(u));
  }
  const NegativeSampler sampler(split.item_train_degrees(), config.neg_sampling,
                                config.popularity_exponent);
  Optimizer<Scalar> optimizer(config);
  AlignmentQueues<Scalar> queues{
      MomentumQueue<Scalar>(static_cast<std::size_t>(config.queue_size),
                            static_cast<Scalar>(config.queue_momentum)),
      MomentumQueue<Scalar>(static_cast<std::size_t>(config.queue_size),
                            static_cast<Scalar>(config.queue_momentum))};
  const auto base_options = fusion_options<Scalar>(config);
  EvalProtocol val_protocol;
  val_protocol.k_values = {10};
  val_protocol.num_sampled_negatives = config.validation_negatives;
  val_protocol.seed = config.seed;

  for (; st.epoch < config.max_epochs; ++st.epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const Phase phase = st.phase(config.warmup_epochs);
    // Moments accumulated on the alignment-only objective would throttle the
    // first joint steps, so the optimizer restarts when the phase changes.
    if (phase == Phase::kJoint && st.epoch == config.warmup_epochs) optimizer.reset();
    std::vector<Index> order = active_users;
    std::shuffle(order.begin(), order.end(), rng);

    EpochLog entry;
    entry.epoch = st.epoch;
    entry.phase = to_string(phase);
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_users)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_users));
      Batch batch;
      for (std::size_t k = start; k < end; ++k) {
        const Index u = order[k];
        const auto& items = items_by_user[static_cast<std::size_t>(u)];
        std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
        batch.users.push_back(u);
        batch.positives.push_back(items[pick(rng)]);
        batch.negatives.push_back(
            sampler.sample(positive_sets[static_cast<std::size_t>(u)], config.n_negatives, rng));
      }
      ForwardOptions<Scalar> options = base_options;
      if (config.embedding_dropout_rate > 0) {
        options.embedding_dropout = config.embedding_dropout_rate;
        options.dropout_seed = rng();
      }
      const InteractionGraph* step_graph = &graph;
      InteractionGraph dropped;
      if (config.edge_dropout_rate > 0) {
        dropped = drop_edges(graph, config.edge_dropout_rate, rng());
        step_graph = &dropped;
      }
      auto obj = evaluate_objective(batch, *step_graph, st.params, raw, config, phase,
                                    true, &queues, &options);
      if (!std::isfinite(obj.loss.total)) {
        throw Error("training diverged at epoch " + std::to_string(st.epoch) +
                    " (non-finite loss: cf=" + std::to_string(obj.loss.cf) +
                    " align_u=" + std::to_string(obj.loss.align_u) +
                    " align_i=" + std::to_string(obj.loss.align_i) + ")");
      }
      optimizer.step(st.params, *obj.grads);
      if (config.queue_size > 0) {
        queues.users.update(obj.aligned_users, detail::gather_rows(obj.zl, obj.aligned_users));
        queues.items.update(obj.aligned_items, detail::gather_rows(obj.zl, obj.aligned_items));
      }
      entry.cf += static_cast<double>(obj.loss.cf);
      entry.align_u += static_cast<double>(obj.loss.align_u);
      entry.align_i += static_cast<double>(obj.loss.align_i);
      entry.reg += static_cast<double>(obj.loss.reg);
      entry.total += static_cast<double>(obj.loss.total);
      ++batches;
    }
    if (batches > 0) {
      const double inv = 1.0 / static_cast<double>(batches);
      entry.cf *= inv;
      entry.align_u *= inv;
      entry.align_i *= inv;
      entry.reg *= inv;
      entry.total *= inv;
    }
    if (!st.params.all_finite()) {
      throw Error("training diverged at epoch " + std::to_string(st.epoch) +
                  ": non-finite parameters");
    }

    bool stop = false;
    if (phase == Phase::kJoint && !split.validation.empty()) {
      const auto zl = project(raw, st.params.projection);
      const auto report = evaluate(st.params, graph, zl, config.effective_layers(),
                                   base_options, split, Holdout::kValidation, val_protocol);
      const double ndcg = report.overall.at(ndcg_key(10));
      entry.val_ndcg10 = ndcg;
      if (!st.has_best || ndcg > st.best_validation_ndcg10) {
        st.best_validation_ndcg10 = ndcg;
        st.best_params = st.params;
        st.has_best = true;
        st.epochs_since_improvement = 0;
      } else {
        ++st.epochs_since_improvement;
        stop = config.patience > 0 && st.epochs_since_improvement >= config.patience;
      }
    }
    entry.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    if (stop) {
      result.stopped_early = true;
      ++st.epoch;
      break;
    }
  }
  std::ostringstream rng_out;
  rng_out << rng;
  st.rng_state = rng_out.str();
  result.params = st.has_best ? st.best_params : st.params;
  return result;
}

}  // namespace recmind
