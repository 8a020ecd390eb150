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

// Gated graph/language fusion.
//
// For l = 0 .. L-1 and every node v:
//   gamma_v   = sigmoid(w . [E_v ; zl_v ; deg_feature_v] + b)
//   fused_v   = gamma_v * E_v + (1 - gamma_v) * zl_v
//   E^{l+1}   = A_hat * fused
// then z_G = mean(E^0 .. E^L), h = alpha * z_G + (1 - alpha) * z_L with
// alpha = sigmoid(alpha_logit), and s(u, i) = <h_u, h_i>.

#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "recmind/embed.hpp"
#include "recmind/graph.hpp"
#include "recmind/types.hpp"

namespace recmind {

template <typename Scalar>
struct ModelParams {
  Matrix<Scalar> base_embeddings;  // E^0, nodes x d
  Vector<Scalar> gate_weight;      // 2d + 1
  Scalar gate_bias = 0;
  Scalar alpha_logit = 0;
  Projection<Scalar> projection;   // d x dim_in

  Index dim() const { return base_embeddings.cols(); }
  Index num_nodes() const { return base_embeddings.rows(); }
  Scalar alpha() const { return sigmoid(alpha_logit); }

  bool all_finite() const {
    return base_embeddings.allFinite() && gate_weight.allFinite() &&
           std::isfinite(gate_bias) && std::isfinite(alpha_logit) &&
           projection.weight.allFinite();
  }

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> p;
    p.base_embeddings = base_embeddings.template cast<Other>();
    p.gate_weight = gate_weight.template cast<Other>();
    p.gate_bias = static_cast<Other>(gate_bias);
    p.alpha_logit = static_cast<Other>(alpha_logit);
    p.projection.weight = projection.weight.template cast<Other>();
    p.projection.trainable = projection.trainable;
    return p;
  }
};

// E^0 ~ N(0, (0.1/sqrt(d))^2); projection entries ~ N(0, (0.1/sqrt(d))^2)
// so a unit raw vector projects to roughly the same norm as a base row;
// gate weights and bias zero (gamma = 0.5); alpha_logit zero (alpha = 0.5).
template <typename Scalar>
ModelParams<Scalar> init_params(Index num_nodes, Index dim, Index dim_in,
                                std::uint64_t seed) {
  ModelParams<Scalar> p;
  std::mt19937_64 rng(seed);
  const double stdev = 0.1 / std::sqrt(static_cast<double>(dim));
  std::normal_distribution<double> normal(0.0, stdev);
  p.base_embeddings.resize(num_nodes, dim);
  for (Index k = 0; k < p.base_embeddings.size(); ++k) {
    p.base_embeddings.data()[k] = static_cast<Scalar>(normal(rng));
  }
  p.gate_weight = Vector<Scalar>::Zero(2 * dim + 1);
  p.projection.weight.resize(dim, dim_in);
  for (Index k = 0; k < p.projection.weight.size(); ++k) {
    p.projection.weight.data()[k] = static_cast<Scalar>(normal(rng));
  }
  return p;
}

// Scalar form of the node gate, for single-node inspection and tests.
template <typename Scalar>
Scalar gate(std::span<const Scalar> state, std::span<const Scalar> zl,
            Scalar degree_feature, const Vector<Scalar>& w, Scalar b) {
  const auto d = state.size();
  if (zl.size() != d || static_cast<std::size_t>(w.size()) != 2 * d + 1) {
    throw Error("gate: dimension mismatch");
  }
  Scalar a = b;
  for (std::size_t k = 0; k < d; ++k) {
    a += w[static_cast<Index>(k)] * state[k] +
         w[static_cast<Index>(d + k)] * zl[k];
  }
  a += w[static_cast<Index>(2 * d)] * degree_feature;
  return sigmoid(a);
}

template <typename Scalar>
struct ForwardOptions {
  // Forces every gamma to exactly 1 (graph-only propagation).
  bool pin_gates_open = false;
  // Overrides sigmoid(alpha_logit).
  std::optional<Scalar> pinned_alpha;
  // Inverted dropout on the fused state before each propagation.
  double embedding_dropout = 0.0;
  std::uint64_t dropout_seed = 0;
};

template <typename Scalar>
struct ForwardTrace {
  std::vector<Matrix<Scalar>> layers;        // E^0 .. E^L
  std::vector<Vector<Scalar>> gates;         // gamma^0 .. gamma^{L-1}
  std::vector<Matrix<Scalar>> fused;         // fused^0 .. fused^{L-1}
  std::vector<Matrix<Scalar>> dropout_mask;  // empty unless dropout is on
  Matrix<Scalar> zg;
  Matrix<Scalar> zl;
  Matrix<Scalar> h;
  Scalar alpha = 0;

  int num_layers() const { return static_cast<int>(layers.size()) - 1; }
};

template <typename Scalar>
Scalar effective_alpha(const ModelParams<Scalar>& params,
                       const ForwardOptions<Scalar>& options) {
  return options.pinned_alpha ? *options.pinned_alpha : params.alpha();
}

// With capture_trace false only zg, zl, h and alpha are kept.
template <typename Scalar>
ForwardTrace<Scalar> forward(const InteractionGraph& graph,
                             const ModelParams<Scalar>& params,
                             const Matrix<Scalar>& zl, int num_layers,
                             const ForwardOptions<Scalar>& options = {},
                             bool capture_trace = true) {
  const Index n = graph.num_nodes();
  const Index d = params.dim();
  if (num_layers < 0) throw Error("forward: negative layer count");
  if (params.num_nodes() != n || zl.rows() != n) {
    throw Error("forward: node count mismatch (graph " + std::to_string(n) +
                ", params " + std::to_string(params.num_nodes()) + ", zl " +
                std::to_string(zl.rows()) + ")");
  }
  if (zl.cols() != d || params.gate_weight.size() != 2 * d + 1) {
    throw Error("forward: dimension mismatch");
  }
  if (!zl.allFinite()) throw Error("forward: non-finite language embedding");

  Vector<Scalar> deg(n);
  for (Index v = 0; v < n; ++v) {
    deg[v] = static_cast<Scalar>(graph.degree_feature[static_cast<std::size_t>(v)]);
  }
  const auto w_state = params.gate_weight.head(d);
  const auto w_lang = params.gate_weight.segment(d, d);
  const Scalar w_deg = params.gate_weight[2 * d];
  // Language contribution to the gate logit is layer independent.
  const Vector<Scalar> lang_logit =
      zl * w_lang + w_deg * deg + Vector<Scalar>::Constant(n, params.gate_bias);

  std::mt19937_64 dropout_rng(options.dropout_seed);
  std::bernoulli_distribution keep(1.0 - options.embedding_dropout);
  const Scalar keep_scale =
      options.embedding_dropout > 0 ? Scalar(1) / Scalar(1 - options.embedding_dropout)
                                    : Scalar(1);

  ForwardTrace<Scalar> trace;
  trace.zl = zl;
  Matrix<Scalar> current = params.base_embeddings;
  Matrix<Scalar> sum = current;
  if (capture_trace) trace.layers.push_back(current);
  Matrix<Scalar> next;
  for (int l = 0; l < num_layers; ++l) {
    Vector<Scalar> gamma;
    Matrix<Scalar> fused;
    if (options.pin_gates_open) {
      gamma = Vector<Scalar>::Ones(n);
      fused = current;
    } else {
      gamma = (current * w_state + lang_logit).unaryExpr([](Scalar a) {
        return sigmoid(a);
      });
      fused = gamma.asDiagonal() * current +
              (Vector<Scalar>::Ones(n) - gamma).asDiagonal() * zl;
    }
    if (options.embedding_dropout > 0) {
      Matrix<Scalar> mask(n, d);
      for (Index k = 0; k < mask.size(); ++k) {
        mask.data()[k] = keep(dropout_rng) ? keep_scale : Scalar(0);
      }
      if (capture_trace) trace.dropout_mask.push_back(mask);
      fused = fused.cwiseProduct(mask);
    }
    propagate_into(graph, fused, next);
    if (!next.allFinite()) {
      throw Error("forward: non-finite state at layer " + std::to_string(l + 1));
    }
    if (capture_trace) {
      trace.gates.push_back(std::move(gamma));
      trace.fused.push_back(std::move(fused));
      trace.layers.push_back(next);
    }
    sum += next;
    current.swap(next);
  }
  trace.zg = sum / static_cast<Scalar>(num_layers + 1);
  trace.alpha = effective_alpha(params, options);
  trace.h = trace.alpha * trace.zg + (Scalar(1) - trace.alpha) * zl;
  if (!trace.h.allFinite()) throw Error("forward: non-finite output");
  return trace;
}

// Gradients with respect to the model parameters. `zl` holds the gradient
// with respect to the projected language embeddings; the projection weight
// gradient follows as zl^T * raw.
template <typename Scalar>
struct ModelGrads {
  Matrix<Scalar> base_embeddings;
  Vector<Scalar> gate_weight;
  Scalar gate_bias = 0;
  Scalar alpha_logit = 0;
  Matrix<Scalar> projection;
  Matrix<Scalar> zl;
};

// Reverse pass through the fused propagation. dh, dzg and dzl are upstream
// gradients on h, z_G and z_L (dzg/dzl may be empty for "none").
template <typename Scalar>
ModelGrads<Scalar> backward(const InteractionGraph& graph,
                            const ModelParams<Scalar>& params,
                            const ForwardTrace<Scalar>& trace,
                            const ForwardOptions<Scalar>& options,
                            const Matrix<Scalar>& dh,
                            const Matrix<Scalar>& dzg_in,
                            const Matrix<Scalar>& dzl_in) {
  const Index n = graph.num_nodes();
  const Index d = params.dim();
  const int num_layers = trace.num_layers();
  if (num_layers < 0) throw Error("backward: forward trace was not captured");
  const Scalar alpha = trace.alpha;

  ModelGrads<Scalar> g;
  g.gate_weight = Vector<Scalar>::Zero(2 * d + 1);
  g.alpha_logit = options.pinned_alpha
                      ? Scalar(0)
                      : (trace.zg - trace.zl).cwiseProduct(dh).sum() * alpha *
                            (Scalar(1) - alpha);

  Matrix<Scalar> dzg = alpha * dh;
  if (dzg_in.size() != 0) dzg += dzg_in;
  g.zl = (Scalar(1) - alpha) * dh;
  if (dzl_in.size() != 0) g.zl += dzl_in;

  const Matrix<Scalar> d_layer = dzg / static_cast<Scalar>(num_layers + 1);
  Vector<Scalar> deg(n);
  for (Index v = 0; v < n; ++v) {
    deg[v] = static_cast<Scalar>(graph.degree_feature[static_cast<std::size_t>(v)]);
  }
  const auto w_state = params.gate_weight.head(d);
  const auto w_lang = params.gate_weight.segment(d, d);

  // d_next accumulates dL/dE^{l+1} while walking layers downward.
  Matrix<Scalar> d_next = d_layer;
  Matrix<Scalar> d_fused;
  for (int l = num_layers - 1; l >= 0; --l) {
    propagate_into(graph, d_next, d_fused);  // A_hat is symmetric
    if (!trace.dropout_mask.empty()) {
      d_fused = d_fused.cwiseProduct(trace.dropout_mask[static_cast<std::size_t>(l)]);
    }
    Matrix<Scalar> d_cur = d_layer;
    if (options.pin_gates_open) {
      d_cur += d_fused;
    } else {
      const auto& gamma = trace.gates[static_cast<std::size_t>(l)];
      const auto& state = trace.layers[static_cast<std::size_t>(l)];
      d_cur += gamma.asDiagonal() * d_fused;
      g.zl += (Vector<Scalar>::Ones(n) - gamma).asDiagonal() * d_fused;
      const Vector<Scalar> d_gamma =
          (state - trace.zl).cwiseProduct(d_fused).rowwise().sum();
      const Vector<Scalar> d_logit = d_gamma.cwiseProduct(
          gamma.cwiseProduct(Vector<Scalar>::Ones(n) - gamma));
      g.gate_weight.head(d) += state.transpose() * d_logit;
      g.gate_weight.segment(d, d) += trace.zl.transpose() * d_logit;
      g.gate_weight[2 * d] += d_logit.dot(deg);
      g.gate_bias += d_logit.sum();
      d_cur += d_logit * w_state.transpose();
      g.zl += d_logit * w_lang.transpose();
    }
    d_next.swap(d_cur);
  }
  g.base_embeddings = std::move(d_next);
  return g;
}

template <typename Scalar>
Scalar score(const Matrix<Scalar>& h, Index user_node, Index item_node) {
  return h.row(user_node).dot(h.row(item_node));
}

template <typename Scalar>
Vector<Scalar> score_batch(const Matrix<Scalar>& h, Index user_node,
                           std::span<const Index> item_nodes) {
  Vector<Scalar> out(static_cast<Index>(item_nodes.size()));
  for (std::size_t k = 0; k < item_nodes.size(); ++k) {
    out[static_cast<Index>(k)] = score(h, user_node, item_nodes[k]);
  }
  return out;
}

}  // namespace recmind
