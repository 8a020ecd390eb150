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

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "recmind/types.hpp"

namespace recmind {

// Bipartite user-item graph with symmetric normalization
//   A_hat = D^{-1/2} A D^{-1/2},
// stored as two CSR halves (user -> items, item -> users). Neighbor lists
// hold local indices of the other side and are sorted.
struct InteractionGraph {
  Index num_users = 0;
  Index num_items = 0;

  std::vector<Index> user_offsets;  // size num_users + 1
  std::vector<Index> user_neighbors;
  std::vector<double> user_edge_norm;

  std::vector<Index> item_offsets;  // size num_items + 1
  std::vector<Index> item_neighbors;
  std::vector<double> item_edge_norm;

  // Indexed by joint node id (users first, then items).
  std::vector<Index> degrees;
  std::vector<double> degree_feature;
  double degree_norm_constant = 1.0;

  Index num_nodes() const { return num_users + num_items; }
  Index num_edges() const { return static_cast<Index>(user_neighbors.size()); }
  Index item_node(Index item) const { return num_users + item; }

  std::span<const Index> items_of(Index user) const {
    const auto b = static_cast<std::size_t>(user_offsets[user]);
    const auto e = static_cast<std::size_t>(user_offsets[user + 1]);
    return {user_neighbors.data() + b, e - b};
  }
  std::span<const Index> users_of(Index item) const {
    const auto b = static_cast<std::size_t>(item_offsets[item]);
    const auto e = static_cast<std::size_t>(item_offsets[item + 1]);
    return {item_neighbors.data() + b, e - b};
  }

  // Normalization coefficient of edge (user, item), 0 when absent.
  double edge_norm(Index user, Index item) const {
    const auto items = items_of(user);
    auto it = std::lower_bound(items.begin(), items.end(), item);
    if (it == items.end() || *it != item) return 0.0;
    return user_edge_norm[static_cast<std::size_t>(user_offsets[user] +
                                                   (it - items.begin()))];
  }

  std::vector<std::pair<Index, Index>> edges() const {
    std::vector<std::pair<Index, Index>> out;
    out.reserve(user_neighbors.size());
    for (Index u = 0; u < num_users; ++u) {
      for (Index i : items_of(u)) out.emplace_back(u, i);
    }
    return out;
  }
};

namespace detail {

inline void fill_csr(InteractionGraph& g,
                     const std::vector<std::pair<Index, Index>>& edges) {
  const auto nu = static_cast<std::size_t>(g.num_users);
  const auto ni = static_cast<std::size_t>(g.num_items);
  g.user_offsets.assign(nu + 1, 0);
  g.item_offsets.assign(ni + 1, 0);
  for (const auto& [u, i] : edges) {
    ++g.user_offsets[static_cast<std::size_t>(u) + 1];
    ++g.item_offsets[static_cast<std::size_t>(i) + 1];
  }
  for (std::size_t k = 0; k < nu; ++k) g.user_offsets[k + 1] += g.user_offsets[k];
  for (std::size_t k = 0; k < ni; ++k) g.item_offsets[k + 1] += g.item_offsets[k];

  g.user_neighbors.assign(edges.size(), 0);
  g.item_neighbors.assign(edges.size(), 0);
  std::vector<Index> ufill(g.user_offsets.begin(), g.user_offsets.end() - 1);
  std::vector<Index> ifill(g.item_offsets.begin(), g.item_offsets.end() - 1);
  for (const auto& [u, i] : edges) {
    g.user_neighbors[static_cast<std::size_t>(ufill[static_cast<std::size_t>(u)]++)] = i;
    g.item_neighbors[static_cast<std::size_t>(ifill[static_cast<std::size_t>(i)]++)] = u;
  }
  for (std::size_t k = 0; k < nu; ++k) {
    std::sort(g.user_neighbors.begin() + g.user_offsets[k],
              g.user_neighbors.begin() + g.user_offsets[k + 1]);
  }
  for (std::size_t k = 0; k < ni; ++k) {
    std::sort(g.item_neighbors.begin() + g.item_offsets[k],
              g.item_neighbors.begin() + g.item_offsets[k + 1]);
  }

  g.degrees.assign(nu + ni, 0);
  for (std::size_t k = 0; k < nu; ++k) {
    g.degrees[k] = g.user_offsets[k + 1] - g.user_offsets[k];
  }
  for (std::size_t k = 0; k < ni; ++k) {
    g.degrees[nu + k] = g.item_offsets[k + 1] - g.item_offsets[k];
  }

  g.user_edge_norm.assign(edges.size(), 0.0);
  g.item_edge_norm.assign(edges.size(), 0.0);
  for (Index u = 0; u < g.num_users; ++u) {
    const double du = static_cast<double>(g.degrees[static_cast<std::size_t>(u)]);
    for (Index e = g.user_offsets[u]; e < g.user_offsets[u + 1]; ++e) {
      const Index i = g.user_neighbors[static_cast<std::size_t>(e)];
      const double di =
          static_cast<double>(g.degrees[static_cast<std::size_t>(g.item_node(i))]);
      g.user_edge_norm[static_cast<std::size_t>(e)] = 1.0 / std::sqrt(du * di);
    }
  }
  for (Index i = 0; i < g.num_items; ++i) {
    const double di =
        static_cast<double>(g.degrees[static_cast<std::size_t>(g.item_node(i))]);
    for (Index e = g.item_offsets[i]; e < g.item_offsets[i + 1]; ++e) {
      const Index u = g.item_neighbors[static_cast<std::size_t>(e)];
      const double du = static_cast<double>(g.degrees[static_cast<std::size_t>(u)]);
      g.item_edge_norm[static_cast<std::size_t>(e)] = 1.0 / std::sqrt(du * di);
    }
  }
}

inline void fill_degree_feature(InteractionGraph& g) {
  Index max_deg = 0;
  for (Index d : g.degrees) max_deg = std::max(max_deg, d);
  g.degree_norm_constant =
      max_deg > 0 ? std::log1p(static_cast<double>(max_deg)) : 1.0;
  g.degree_feature.resize(g.degrees.size());
  for (std::size_t v = 0; v < g.degrees.size(); ++v) {
    g.degree_feature[v] =
        std::log1p(static_cast<double>(g.degrees[v])) / g.degree_norm_constant;
  }
}

}  // namespace detail

inline InteractionGraph build_graph(
    const std::vector<std::pair<Index, Index>>& edges, Index num_users,
    Index num_items) {
  if (num_users < 0 || num_items < 0) throw Error("build_graph: negative size");
  InteractionGraph g;
  g.num_users = num_users;
  g.num_items = num_items;
  for (const auto& [u, i] : edges) {
    if (u < 0 || u >= num_users || i < 0 || i >= num_items) {
      throw Error("build_graph: edge (" + std::to_string(u) + ", " +
                  std::to_string(i) + ") out of range");
    }
  }
  detail::fill_csr(g, edges);
  for (Index u = 0; u < num_users; ++u) {
    const auto items = g.items_of(u);
    auto dup = std::adjacent_find(items.begin(), items.end());
    if (dup != items.end()) {
      throw Error("build_graph: duplicate edge (" + std::to_string(u) + ", " +
                  std::to_string(*dup) + ")");
    }
  }
  detail::fill_degree_feature(g);
  return g;
}

// out = A_hat * states. Rows of zero-degree nodes come out as zero.
template <typename Scalar>
void propagate_into(const InteractionGraph& g, const Matrix<Scalar>& states,
                    Matrix<Scalar>& out) {
  if (states.rows() != g.num_nodes()) {
    throw Error("propagate: state rows " + std::to_string(states.rows()) +
                " != graph nodes " + std::to_string(g.num_nodes()));
  }
  out.setZero(states.rows(), states.cols());
  for (Index u = 0; u < g.num_users; ++u) {
    auto row = out.row(u);
    for (Index e = g.user_offsets[u]; e < g.user_offsets[u + 1]; ++e) {
      const auto k = static_cast<std::size_t>(e);
      row += static_cast<Scalar>(g.user_edge_norm[k]) *
             states.row(g.item_node(g.user_neighbors[k]));
    }
  }
  for (Index i = 0; i < g.num_items; ++i) {
    auto row = out.row(g.item_node(i));
    for (Index e = g.item_offsets[i]; e < g.item_offsets[i + 1]; ++e) {
      const auto k = static_cast<std::size_t>(e);
      row += static_cast<Scalar>(g.item_edge_norm[k]) *
             states.row(g.item_neighbors[k]);
    }
  }
}

template <typename Scalar>
Matrix<Scalar> propagate(const InteractionGraph& g,
                         const Matrix<Scalar>& states) {
  Matrix<Scalar> out;
  propagate_into(g, states, out);
  return out;
}

// Removes every edge independently with probability `rate` and recomputes
// the normalization from the surviving degrees. The degree feature used by
// the gate is a node attribute and is carried over from the input graph.
inline InteractionGraph drop_edges(const InteractionGraph& g, double rate,
                                   std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error("drop_edges: rate must lie in [0, 1)");
  }
  if (rate == 0.0) return g;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - rate);
  std::vector<std::pair<Index, Index>> kept;
  for (const auto& e : g.edges()) {
    if (keep(rng)) kept.push_back(e);
  }
  InteractionGraph out;
  out.num_users = g.num_users;
  out.num_items = g.num_items;
  detail::fill_csr(out, kept);
  out.degree_feature = g.degree_feature;
  out.degree_norm_constant = g.degree_norm_constant;
  return out;
}

}  // namespace recmind
