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
#include <string>
#include <unordered_set>
#include <vector>

#include "recmind/types.hpp"

namespace recmind {

enum class NegativeSampling { kUniform, kPopularity };

inline std::string to_string(NegativeSampling m) {
  return m == NegativeSampling::kUniform ? "uniform" : "popularity";
}

inline NegativeSampling negative_sampling_from_string(const std::string& s) {
  if (s == "uniform") return NegativeSampling::kUniform;
  if (s == "popularity") return NegativeSampling::kPopularity;
  throw Error("unknown negative sampling mode '" + s + "'");
}

// Training-time negatives. Draws are independent (with replacement) and
// rejected when they hit a known positive. Popularity mode samples items
// with positive degree proportionally to degree^exponent.
class NegativeSampler {
 public:
  NegativeSampler(const std::vector<Index>& item_degrees, NegativeSampling mode,
                  double exponent)
      : mode_(mode), num_items_(static_cast<Index>(item_degrees.size())) {
    std::vector<double> weights(item_degrees.size());
    for (std::size_t i = 0; i < item_degrees.size(); ++i) {
      if (item_degrees[i] > 0) {
        weights[i] = std::pow(static_cast<double>(item_degrees[i]), exponent);
        popular_.push_back(static_cast<Index>(i));
      }
    }
    if (mode_ == NegativeSampling::kPopularity && !popular_.empty()) {
      popularity_ = std::discrete_distribution<Index>(weights.begin(), weights.end());
    }
  }

  NegativeSampling mode() const { return mode_; }

  template <typename Set, typename Rng>
  std::vector<Index> sample(const Set& known_positives, int n, Rng& rng) const {
    if (n <= 0) return {};
    Index eligible = 0;
    if (mode_ == NegativeSampling::kUniform) {
      eligible = num_items_;
      for (Index p : known_positives) {
        if (p >= 0 && p < num_items_) --eligible;
      }
    } else {
      for (Index i : popular_) {
        if (!known_positives.contains(i)) ++eligible;
      }
    }
    if (eligible < n) {
      throw Error("sample_negatives: only " + std::to_string(eligible) +
                  " eligible items for " + std::to_string(n) + " negatives");
    }
    std::uniform_int_distribution<Index> uniform(0, num_items_ - 1);
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(n));
    while (static_cast<int>(out.size()) < n) {
      const Index cand = mode_ == NegativeSampling::kUniform ? uniform(rng)
                                                             : popularity_(rng);
      if (!known_positives.contains(cand)) out.push_back(cand);
    }
    return out;
  }

 private:
  NegativeSampling mode_;
  Index num_items_;
  std::vector<Index> popular_;
  mutable std::discrete_distribution<Index> popularity_;
};

template <typename Set, typename Rng>
std::vector<Index> sample_negatives(const std::vector<Index>& item_degrees,
                                    const Set& known_positives, int n,
                                    NegativeSampling mode, double exponent,
                                    Rng& rng) {
  return NegativeSampler(item_degrees, mode, exponent)
      .sample(known_positives, n, rng);
}

// Up to n distinct items drawn uniformly from [0, num_items) minus
// `excluded`. Returns every eligible item when fewer than n remain.
template <typename Set, typename Rng>
std::vector<Index> sample_distinct_uniform(Index num_items, const Set& excluded,
                                           Index n, Rng& rng) {
  Index excluded_in_range = 0;
  for (Index e : excluded) {
    if (e >= 0 && e < num_items) ++excluded_in_range;
  }
  const Index eligible = num_items - excluded_in_range;
  if (eligible <= 2 * n) {
    std::vector<Index> pool;
    pool.reserve(static_cast<std::size_t>(eligible));
    for (Index i = 0; i < num_items; ++i) {
      if (!excluded.contains(i)) pool.push_back(i);
    }
    const Index take = std::min(n, eligible);
    for (Index k = 0; k < take; ++k) {
      std::uniform_int_distribution<Index> pick(k, eligible - 1);
      std::swap(pool[static_cast<std::size_t>(k)],
                pool[static_cast<std::size_t>(pick(rng))]);
    }
    pool.resize(static_cast<std::size_t>(take));
    return pool;
  }
  std::uniform_int_distribution<Index> uniform(0, num_items - 1);
  std::unordered_set<Index> seen;
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(n));
  while (static_cast<Index>(out.size()) < n) {
    const Index cand = uniform(rng);
    if (excluded.contains(cand) || !seen.insert(cand).second) continue;
    out.push_back(cand);
  }
  return out;
}

}  // namespace recmind
