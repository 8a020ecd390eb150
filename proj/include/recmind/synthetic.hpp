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

// Seeded synthetic datasets with planted cluster structure, used by the
// test and acceptance suites and by `recmind synth`.

#pragma once

#include <algorithm>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "recmind/dataset.hpp"
#include "recmind/embed.hpp"
#include "recmind/types.hpp"

namespace recmind::synthetic {

struct Dataset {
  std::vector<RawInteraction> interactions;
  DatasetSplit split;
  LanguageEmbeddingStore language;  // node order of `split`
  std::vector<int> user_cluster;    // by user vocab index
  std::vector<int> item_cluster;    // by item vocab index
};

inline std::string padded_id(char prefix, int n) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%c%05d", prefix, n);
  return buf;
}

namespace detail {

inline Eigen::VectorXf unit_gaussian(Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (Index k = 0; k < dim; ++k) v[k] = normal(rng);
  return (v / v.norm()).cast<float>();
}

inline Eigen::VectorXf noisy(const Eigen::VectorXf& centroid, double sigma,
                             std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sigma / std::sqrt(static_cast<double>(centroid.size())));
  Eigen::VectorXf v = centroid;
  for (Index k = 0; k < v.size(); ++k) v[k] += static_cast<float>(normal(rng));
  return v / v.norm();
}

// Fills the language store in node order from per-entity vectors keyed by
// the generator's integer ids.
inline void fill_language(Dataset& ds, Index dim_in,
                          const std::vector<Eigen::VectorXf>& user_vecs,
                          const std::vector<Eigen::VectorXf>& item_vecs,
                          const std::vector<int>& user_clusters,
                          const std::vector<int>& item_clusters) {
  const auto& s = ds.split;
  ds.language.dim_in = dim_in;
  ds.language.source = EmbeddingSource::kFile;
  ds.language.vectors.resize(s.num_users() + s.num_items(), dim_in);
  ds.language.has_text.assign(static_cast<std::size_t>(s.num_users() + s.num_items()), true);
  ds.user_cluster.resize(static_cast<std::size_t>(s.num_users()));
  ds.item_cluster.resize(static_cast<std::size_t>(s.num_items()));
  for (Index u = 0; u < s.num_users(); ++u) {
    const int raw = std::stoi(s.user_vocab.ids[static_cast<std::size_t>(u)].substr(1));
    ds.language.vectors.row(u) = user_vecs[static_cast<std::size_t>(raw)].transpose();
    ds.user_cluster[static_cast<std::size_t>(u)] = user_clusters[static_cast<std::size_t>(raw)];
  }
  for (Index i = 0; i < s.num_items(); ++i) {
    const int raw = std::stoi(s.item_vocab.ids[static_cast<std::size_t>(i)].substr(1));
    ds.language.vectors.row(s.num_users() + i) = item_vecs[static_cast<std::size_t>(raw)].transpose();
    ds.item_cluster[static_cast<std::size_t>(i)] = item_clusters[static_cast<std::size_t>(raw)];
  }
}

}  // namespace detail

struct TwoClusterOptions {
  int num_users = 20;
  int num_items = 30;
  int interactions_per_user = 8;
  Index dim_in = 8;
  double text_noise = 0.5;
  std::uint64_t seed = 7;
};

// Users and items split evenly into two clusters; every user interacts only
// with items of its own cluster, at increasing timestamps. Language vectors
// are noisy copies of a per-cluster centroid.
inline Dataset two_cluster(const TwoClusterOptions& o = {}) {
  std::mt19937_64 rng(o.seed);
  std::vector<Eigen::VectorXf> centroids = {detail::unit_gaussian(o.dim_in, rng),
                                            detail::unit_gaussian(o.dim_in, rng)};
  std::vector<int> user_clusters(static_cast<std::size_t>(o.num_users));
  std::vector<int> item_clusters(static_cast<std::size_t>(o.num_items));
  std::vector<std::vector<int>> items_in(2);
  for (int i = 0; i < o.num_items; ++i) {
    item_clusters[static_cast<std::size_t>(i)] = i < o.num_items / 2 ? 0 : 1;
    items_in[static_cast<std::size_t>(item_clusters[static_cast<std::size_t>(i)])].push_back(i);
  }
  Dataset ds;
  for (int u = 0; u < o.num_users; ++u) {
    const int c = u < o.num_users / 2 ? 0 : 1;
    user_clusters[static_cast<std::size_t>(u)] = c;
    auto pool = items_in[static_cast<std::size_t>(c)];
    std::shuffle(pool.begin(), pool.end(), rng);
    const int m = std::min<int>(o.interactions_per_user, static_cast<int>(pool.size()));
    for (int k = 0; k < m; ++k) {
      ds.interactions.push_back({padded_id('u', u), padded_id('i', pool[static_cast<std::size_t>(k)]),
                                 1000 + k, 1.0});
    }
  }
  ds.split = build_split(ds.interactions, 3);
  std::vector<Eigen::VectorXf> user_vecs, item_vecs;
  for (int u = 0; u < o.num_users; ++u) {
    user_vecs.push_back(detail::noisy(centroids[static_cast<std::size_t>(user_clusters[static_cast<std::size_t>(u)])], o.text_noise, rng));
  }
  for (int i = 0; i < o.num_items; ++i) {
    item_vecs.push_back(detail::noisy(centroids[static_cast<std::size_t>(item_clusters[static_cast<std::size_t>(i)])], o.text_noise, rng));
  }
  detail::fill_language(ds, o.dim_in, user_vecs, item_vecs, user_clusters, item_clusters);
  return ds;
}

struct ColdStartOptions {
  int clusters = 4;
  // Communities inside a cluster; visible in the graph, invisible in text.
  int communities_per_cluster = 2;
  int users_per_community = 30;
  int items_per_cluster = 50;
  double cold_fraction = 0.1;
  // Share of users whose final (test) interaction is a cold item.
  double cold_test_fraction = 0.35;
  int interactions_per_user = 12;
  // Probability that a warm interaction leaves the user's community (but
  // stays in the cluster).
  double community_leak = 0.15;
  Index dim_in = 16;
  double text_noise = 0.6;
  std::uint64_t seed = 11;
};

// Clustered catalog where a fraction of items never appear in training:
// they only occur as the last (test) interaction of some users, and their
// language vector is exactly the cluster centroid. Warm items carry noisy
// centroid text; users' text is a noisy centroid of their cluster.
inline Dataset cold_start(const ColdStartOptions& o = {}) {
  std::mt19937_64 rng(o.seed);
  const int num_items = o.clusters * o.items_per_cluster;
  const int cold_per_cluster =
      std::max(1, static_cast<int>(o.cold_fraction * o.items_per_cluster + 0.5));
  std::vector<Eigen::VectorXf> centroids;
  for (int c = 0; c < o.clusters; ++c) centroids.push_back(detail::unit_gaussian(o.dim_in, rng));

  // Items: per cluster the first cold_per_cluster ids are cold; warm items
  // are dealt round-robin to communities.
  std::vector<int> item_clusters(static_cast<std::size_t>(num_items));
  std::vector<std::vector<int>> cold_items(static_cast<std::size_t>(o.clusters));
  std::vector<std::vector<std::vector<int>>> community_items(
      static_cast<std::size_t>(o.clusters),
      std::vector<std::vector<int>>(static_cast<std::size_t>(o.communities_per_cluster)));
  std::vector<bool> is_cold(static_cast<std::size_t>(num_items), false);
  for (int c = 0; c < o.clusters; ++c) {
    for (int k = 0; k < o.items_per_cluster; ++k) {
      const int id = c * o.items_per_cluster + k;
      item_clusters[static_cast<std::size_t>(id)] = c;
      if (k < cold_per_cluster) {
        cold_items[static_cast<std::size_t>(c)].push_back(id);
        is_cold[static_cast<std::size_t>(id)] = true;
      } else {
        community_items[static_cast<std::size_t>(c)]
                       [static_cast<std::size_t>((k - cold_per_cluster) % o.communities_per_cluster)]
                           .push_back(id);
      }
    }
  }

  Dataset ds;
  const int num_users = o.clusters * o.communities_per_cluster * o.users_per_community;
  std::vector<int> user_clusters(static_cast<std::size_t>(num_users));
  std::vector<int> cold_cursor(static_cast<std::size_t>(o.clusters), 0);
  std::bernoulli_distribution leak(o.community_leak);
  std::bernoulli_distribution cold_test(o.cold_test_fraction);
  int u = 0;
  for (int c = 0; c < o.clusters; ++c) {
    for (int g = 0; g < o.communities_per_cluster; ++g) {
      for (int n = 0; n < o.users_per_community; ++n, ++u) {
        user_clusters[static_cast<std::size_t>(u)] = c;
        const auto& home = community_items[static_cast<std::size_t>(c)][static_cast<std::size_t>(g)];
        std::vector<int> chosen;
        int guard = 0;
        while (static_cast<int>(chosen.size()) < o.interactions_per_user && guard++ < 10000) {
          int item;
          if (leak(rng)) {
            const int other = static_cast<int>(
                std::uniform_int_distribution<int>(0, o.communities_per_cluster - 1)(rng));
            const auto& pool = community_items[static_cast<std::size_t>(c)][static_cast<std::size_t>(other)];
            item = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
          } else {
            // Skewed toward the head of the community list.
            const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            const auto idx = static_cast<std::size_t>(r * r * static_cast<double>(home.size()));
            item = home[std::min(idx, home.size() - 1)];
          }
          if (std::find(chosen.begin(), chosen.end(), item) == chosen.end()) chosen.push_back(item);
        }
        // Each cold item must appear at least once, so the first users of a
        // cluster are assigned cold tests until every cold item is used.
        const auto& colds = cold_items[static_cast<std::size_t>(c)];
        int& cursor = cold_cursor[static_cast<std::size_t>(c)];
        if (cursor < static_cast<int>(colds.size()) || cold_test(rng)) {
          chosen.push_back(colds[static_cast<std::size_t>(cursor % static_cast<int>(colds.size()))]);
          ++cursor;
        }
        for (std::size_t k = 0; k < chosen.size(); ++k) {
          ds.interactions.push_back({padded_id('u', u), padded_id('i', chosen[k]),
                                     static_cast<std::int64_t>(1000 + k), 1.0});
        }
      }
    }
  }
  ds.split = build_split(ds.interactions, 3);

  std::vector<Eigen::VectorXf> user_vecs, item_vecs;
  for (int k = 0; k < num_users; ++k) {
    user_vecs.push_back(detail::noisy(centroids[static_cast<std::size_t>(user_clusters[static_cast<std::size_t>(k)])], o.text_noise, rng));
  }
  for (int i = 0; i < num_items; ++i) {
    const auto& centroid = centroids[static_cast<std::size_t>(item_clusters[static_cast<std::size_t>(i)])];
    item_vecs.push_back(is_cold[static_cast<std::size_t>(i)] ? centroid
                                                             : detail::noisy(centroid, o.text_noise, rng));
  }
  detail::fill_language(ds, o.dim_in, user_vecs, item_vecs, user_clusters, item_clusters);
  return ds;
}

}  // namespace recmind::synthetic
