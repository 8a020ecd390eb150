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

// Leave-one-out ranking evaluation: the held-out item is ranked against
// sampled (or all) non-positive items; Recall@K and NDCG@K are averaged
// over users, overall and per degree stratum of the held-out item.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "recmind/dataset.hpp"
#include "recmind/hash.hpp"
#include "recmind/model.hpp"
#include "recmind/parallel.hpp"
#include "recmind/sampling.hpp"
#include "recmind/types.hpp"

namespace recmind {

// 1 + number of candidates scoring strictly higher + number of
// lower-indexed candidates with an equal score.
template <typename Scalar>
Index rank_position(std::span<const Scalar> scores, std::size_t positive) {
  if (positive >= scores.size()) throw Error("rank_position: bad positive index");
  const Scalar s = scores[positive];
  Index rank = 1;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > s || (j < positive && scores[j] == s)) ++rank;
  }
  return rank;
}

inline double recall_at_k(Index rank, Index k) { return rank <= k ? 1.0 : 0.0; }

inline double ndcg_at_k(Index rank, Index k) {
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

enum class Holdout { kValidation, kTest };

inline std::string to_string(Holdout h) {
  return h == Holdout::kValidation ? "validation" : "test";
}

struct EvalProtocol {
  std::vector<Index> k_values = {10, 20, 40};
  Index num_sampled_negatives = 100;
  bool full_ranking = false;
  // Held-out item degree thresholds; {3} yields strata deg<=3 and deg>3.
  std::vector<Index> strata = {3};
  std::uint64_t seed = 2024;
};

struct MetricSet {
  std::map<std::string, double> values;  // "recall@20" -> ...

  double at(const std::string& key) const { return values.at(key); }
};

struct StratumReport {
  std::string label;
  Index min_degree = 0;   // inclusive
  Index max_degree = -1;  // inclusive, -1 = unbounded
  Index users = 0;
  MetricSet metrics;
};

struct EvalReport {
  std::string which;
  std::string mode;  // "sampled" or "full"
  EvalProtocol protocol;
  Index users_evaluated = 0;
  // Users whose exclusion set left fewer candidates than requested.
  Index short_pool_users = 0;
  MetricSet overall;
  std::vector<StratumReport> strata;
  std::optional<std::string> baseline_name;
  std::map<std::string, double> relative_improvement;  // percent
};

inline std::string recall_key(Index k) { return "recall@" + std::to_string(k); }
inline std::string ndcg_key(Index k) { return "ndcg@" + std::to_string(k); }

// Scores `items` (local item indices) for one user (local index).
using Scorer =
    std::function<std::vector<double>(Index user, std::span<const Index> items)>;

namespace detail {

inline std::vector<StratumReport> make_strata(std::vector<Index> thresholds) {
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  std::vector<StratumReport> out;
  Index lo = 0;
  for (Index t : thresholds) {
    StratumReport s;
    s.min_degree = lo;
    s.max_degree = t;
    s.label = lo == 0 ? "deg<=" + std::to_string(t)
                      : std::to_string(lo - 1) + "<deg<=" + std::to_string(t);
    out.push_back(s);
    lo = t + 1;
  }
  StratumReport last;
  last.min_degree = lo;
  last.label = lo == 0 ? "all" : "deg>" + std::to_string(lo - 1);
  out.push_back(last);
  return out;
}

}  // namespace detail

// Per-user stream: independent of vocab order and of the other holdout.
inline std::uint64_t user_eval_seed(std::uint64_t seed, Holdout which,
                                    const std::string& user_id) {
  return stable_hash64(to_string(which) + '\x1f' + user_id, seed);
}

inline EvalReport evaluate_scorer(const Scorer& scorer,
                                  const DatasetSplit& split, Holdout which,
                                  const EvalProtocol& protocol) {
  const auto& holdout =
      which == Holdout::kValidation ? split.validation : split.test;
  if (holdout.empty()) throw Error("evaluate: empty " + to_string(which) + " holdout");
  for (Index k : protocol.k_values) {
    if (k < 1) throw Error("evaluate: K must be positive");
  }
  const auto known = split.known_positives();
  const auto degrees = split.item_train_degrees();

  std::vector<std::pair<Index, HeldOut>> users(holdout.begin(), holdout.end());
  std::vector<Index> ranks(users.size());
  std::vector<char> short_pool(users.size(), 0);

  parallel_for(users.size(), [&](std::size_t n) {
    const auto [user, held] = users[n];
    const auto& excluded = known[static_cast<std::size_t>(user)];
    std::vector<Index> candidates;
    if (protocol.full_ranking) {
      for (Index i = 0; i < split.num_items(); ++i) {
        if (i == held.item || !excluded.contains(i)) candidates.push_back(i);
      }
    } else {
      std::mt19937_64 rng(user_eval_seed(
          protocol.seed, which, split.user_vocab.ids[static_cast<std::size_t>(user)]));
      candidates = sample_distinct_uniform(split.num_items(), excluded,
                                           protocol.num_sampled_negatives, rng);
      if (static_cast<Index>(candidates.size()) < protocol.num_sampled_negatives) {
        short_pool[n] = 1;
      }
      candidates.push_back(held.item);
      std::sort(candidates.begin(), candidates.end());
    }
    const auto pos = static_cast<std::size_t>(
        std::lower_bound(candidates.begin(), candidates.end(), held.item) -
        candidates.begin());
    const auto scores = scorer(user, candidates);
    ranks[n] = rank_position<double>(scores, pos);
  });

  EvalReport report;
  report.which = to_string(which);
  report.mode = protocol.full_ranking ? "full" : "sampled";
  report.protocol = protocol;
  report.users_evaluated = static_cast<Index>(users.size());
  report.strata = detail::make_strata(protocol.strata);

  std::vector<std::map<std::string, double>> stratum_sums(report.strata.size());
  std::map<std::string, double> sums;
  for (std::size_t n = 0; n < users.size(); ++n) {
    report.short_pool_users += short_pool[n];
    const Index deg = degrees[static_cast<std::size_t>(users[n].second.item)];
    std::size_t s = 0;
    while (report.strata[s].max_degree >= 0 && deg > report.strata[s].max_degree) ++s;
    ++report.strata[s].users;
    for (Index k : protocol.k_values) {
      const double r = recall_at_k(ranks[n], k);
      const double g = ndcg_at_k(ranks[n], k);
      sums[recall_key(k)] += r;
      sums[ndcg_key(k)] += g;
      stratum_sums[s][recall_key(k)] += r;
      stratum_sums[s][ndcg_key(k)] += g;
    }
  }
  for (const auto& [key, v] : sums) {
    report.overall.values[key] = v / static_cast<double>(users.size());
  }
  for (std::size_t s = 0; s < report.strata.size(); ++s) {
    for (Index k : protocol.k_values) {
      for (const auto& key : {recall_key(k), ndcg_key(k)}) {
        const Index u = report.strata[s].users;
        report.strata[s].metrics.values[key] =
            u > 0 ? stratum_sums[s][key] / static_cast<double>(u) : 0.0;
      }
    }
  }
  return report;
}

// Scores with the fused representation h (joint node rows).
template <typename Scalar>
EvalReport evaluate_embeddings(const Matrix<Scalar>& h,
                               const DatasetSplit& split, Holdout which,
                               const EvalProtocol& protocol) {
  if (h.rows() != split.num_users() + split.num_items()) {
    throw Error("evaluate: representation rows do not match the vocab");
  }
  const Index nu = split.num_users();
  Scorer scorer = [&](Index user, std::span<const Index> items) {
    std::vector<double> out(items.size());
    for (std::size_t k = 0; k < items.size(); ++k) {
      out[k] = static_cast<double>(score(h, user, nu + items[k]));
    }
    return out;
  };
  return evaluate_scorer(scorer, split, which, protocol);
}

// One shared forward pass, then ranking.
template <typename Scalar>
EvalReport evaluate(const ModelParams<Scalar>& params,
                    const InteractionGraph& graph, const Matrix<Scalar>& zl,
                    int num_layers, const ForwardOptions<Scalar>& options,
                    const DatasetSplit& split, Holdout which,
                    const EvalProtocol& protocol) {
  ForwardOptions<Scalar> eval_options = options;
  eval_options.embedding_dropout = 0.0;
  const auto trace = forward(graph, params, zl, num_layers, eval_options,
                             /*capture_trace=*/false);
  return evaluate_embeddings(trace.h, split, which, protocol);
}

// Percent change of every shared metric relative to the baseline.
inline void attach_baseline(EvalReport& report, const EvalReport& baseline,
                            const std::string& baseline_name) {
  report.baseline_name = baseline_name;
  report.relative_improvement.clear();
  for (const auto& [key, v] : report.overall.values) {
    auto it = baseline.overall.values.find(key);
    if (it == baseline.overall.values.end() || it->second == 0.0) continue;
    report.relative_improvement[key] = 100.0 * (v - it->second) / it->second;
  }
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json to_json(const EvalProtocol& p) {
  nlohmann::ordered_json j;
  j["k_values"] = p.k_values;
  j["num_sampled_negatives"] = p.num_sampled_negatives;
  j["full_ranking"] = p.full_ranking;
  j["strata"] = p.strata;
  j["seed"] = p.seed;
  return j;
}

inline EvalProtocol eval_protocol_from_json(const nlohmann::json& j) {
  EvalProtocol p;
  if (j.contains("k_values")) p.k_values = j["k_values"].get<std::vector<Index>>();
  if (j.contains("num_sampled_negatives")) {
    p.num_sampled_negatives = j["num_sampled_negatives"].get<Index>();
  }
  if (j.contains("full_ranking")) p.full_ranking = j["full_ranking"].get<bool>();
  if (j.contains("strata")) p.strata = j["strata"].get<std::vector<Index>>();
  if (j.contains("seed")) p.seed = j["seed"].get<std::uint64_t>();
  return p;
}

inline nlohmann::ordered_json metrics_json(const MetricSet& m,
                                           const std::vector<Index>& ks) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (Index k : ks) j[recall_key(k)] = m.values.at(recall_key(k));
  for (Index k : ks) j[ndcg_key(k)] = m.values.at(ndcg_key(k));
  return j;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["which"] = r.which;
  j["mode"] = r.mode;
  j["protocol"] = to_json(r.protocol);
  j["users_evaluated"] = r.users_evaluated;
  j["short_pool_users"] = r.short_pool_users;
  j["overall"] = metrics_json(r.overall, r.protocol.k_values);
  j["strata"] = nlohmann::ordered_json::array();
  for (const auto& s : r.strata) {
    nlohmann::ordered_json sj;
    sj["label"] = s.label;
    sj["min_degree"] = s.min_degree;
    sj["max_degree"] = s.max_degree;
    sj["users"] = s.users;
    sj["metrics"] = metrics_json(s.metrics, r.protocol.k_values);
    j["strata"].push_back(sj);
  }
  if (r.baseline_name) {
    j["baseline"] = *r.baseline_name;
    j["relative_improvement_pct"] = r.relative_improvement;
  }
  return j;
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.which = j.at("which").get<std::string>();
  r.mode = j.at("mode").get<std::string>();
  r.protocol = eval_protocol_from_json(j.at("protocol"));
  r.users_evaluated = j.at("users_evaluated").get<Index>();
  r.short_pool_users = j.value("short_pool_users", Index{0});
  for (const auto& [k, v] : j.at("overall").items()) {
    r.overall.values[k] = v.get<double>();
  }
  for (const auto& sj : j.at("strata")) {
    StratumReport s;
    s.label = sj.at("label").get<std::string>();
    s.min_degree = sj.at("min_degree").get<Index>();
    s.max_degree = sj.at("max_degree").get<Index>();
    s.users = sj.at("users").get<Index>();
    for (const auto& [k, v] : sj.at("metrics").items()) {
      s.metrics.values[k] = v.get<double>();
    }
    r.strata.push_back(std::move(s));
  }
  return r;
}

// Recall@K columns, then NDCG@K columns; one row for the model, one per
// stratum, and baseline/improvement rows when a baseline is attached.
inline std::string to_markdown(const EvalReport& r,
                               const std::string& model_name,
                               const EvalReport* baseline = nullptr) {
  std::vector<std::string> keys, headers;
  for (Index k : r.protocol.k_values) {
    keys.push_back(recall_key(k));
    headers.push_back("Recall@" + std::to_string(k));
  }
  for (Index k : r.protocol.k_values) {
    keys.push_back(ndcg_key(k));
    headers.push_back("NDCG@" + std::to_string(k));
  }
  std::ostringstream out;
  out << "| Model |";
  for (const auto& h : headers) out << ' ' << h << " |";
  out << "\n|---|";
  for (std::size_t c = 0; c < headers.size(); ++c) out << "---|";
  out << '\n';
  auto row = [&](const std::string& name, const MetricSet& m) {
    out << "| " << name << " |";
    for (const auto& k : keys) {
      auto it = m.values.find(k);
      out << ' ';
      if (it == m.values.end()) {
        out << '-';
      } else {
        out << std::fixed << std::setprecision(4) << it->second;
      }
      out << " |";
    }
    out << '\n';
  };
  if (baseline != nullptr && r.baseline_name) row(*r.baseline_name, baseline->overall);
  row(model_name, r.overall);
  for (const auto& s : r.strata) {
    row(model_name + " [" + s.label + ", n=" + std::to_string(s.users) + "]",
        s.metrics);
  }
  if (r.baseline_name) {
    out << "| Improve |";
    for (const auto& k : keys) {
      auto it = r.relative_improvement.find(k);
      out << ' ';
      if (it == r.relative_improvement.end()) {
        out << '-';
      } else {
        out << std::showpos << std::fixed << std::setprecision(2) << it->second
            << std::noshowpos << '%';
      }
      out << " |";
    }
    out << '\n';
  }
  out << "\nmode: " << r.mode << ", holdout: " << r.which
      << ", users: " << r.users_evaluated;
  if (!r.protocol.full_ranking) {
    out << ", sampled negatives: " << r.protocol.num_sampled_negatives;
  }
  out << '\n';
  return out.str();
}

}  // namespace recmind
