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

// Interaction ingestion, k-core filtering, text normalization and the
// chronological leave-one-out split.

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "recmind/types.hpp"

namespace recmind {

struct RawInteraction {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;
  double weight = 1.0;

  bool operator==(const RawInteraction&) const = default;
};

enum class InteractionFormat { kTsv, kJsonl };

inline InteractionFormat format_from_path(const std::string& path) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() &&
           path.compare(path.size() - suffix.size(), suffix.size(), suffix) ==
               0;
  };
  if (ends_with(".jsonl") || ends_with(".json")) return InteractionFormat::kJsonl;
  return InteractionFormat::kTsv;
}

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline bool parse_int64(std::string_view s, std::int64_t* out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, *out);
  return ec == std::errc() && ptr == end;
}

inline void check_interaction(const RawInteraction& r,
                              const std::string& source, std::size_t line) {
  if (r.user_id.empty() || r.item_id.empty()) {
    throw ParseError(source, line, "empty user or item id");
  }
  if (r.timestamp < 0) throw ParseError(source, line, "negative timestamp");
  if (!(r.weight > 0) || !std::isfinite(r.weight)) {
    throw ParseError(source, line, "weight must be positive");
  }
}

}  // namespace detail

// One record per non-blank line. Duplicates are kept here.
inline std::vector<RawInteraction> parse_interactions(std::istream& in,
                                                      InteractionFormat format,
                                                      const std::string& source) {
  std::vector<RawInteraction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    RawInteraction r;
    if (format == InteractionFormat::kTsv) {
      const auto parts = detail::split_tabs(line);
      if (parts.size() < 3 || parts.size() > 4) {
        throw ParseError(source, line_no,
                         "expected user\\titem\\ttimestamp[\\tweight]");
      }
      r.user_id = std::string(parts[0]);
      r.item_id = std::string(parts[1]);
      if (!detail::parse_int64(parts[2], &r.timestamp)) {
        throw ParseError(source, line_no, "bad timestamp");
      }
      if (parts.size() == 4) {
        try {
          r.weight = std::stod(std::string(parts[3]));
        } catch (const std::exception&) {
          throw ParseError(source, line_no, "bad weight");
        }
      }
    } else {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
        r.user_id = j.at("user").get<std::string>();
        r.item_id = j.at("item").get<std::string>();
        r.timestamp = j.at("ts").get<std::int64_t>();
        if (j.contains("weight")) r.weight = j.at("weight").get<double>();
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(source, line_no, e.what());
      }
    }
    detail::check_interaction(r, source, line_no);
    out.push_back(std::move(r));
  }
  if (out.empty()) throw IoError(source + ": no interactions");
  return out;
}

inline std::vector<RawInteraction> load_interactions(const std::string& path,
                                                     InteractionFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_interactions(in, format, path);
}

// Keeps the earliest occurrence of every (user, item) pair; equal timestamps
// keep the first record in input order. Output preserves input order.
inline std::vector<RawInteraction> deduplicate(
    const std::vector<RawInteraction>& interactions) {
  std::map<std::pair<std::string, std::string>, std::size_t> first;
  for (std::size_t i = 0; i < interactions.size(); ++i) {
    const auto& r = interactions[i];
    auto [it, inserted] = first.try_emplace({r.user_id, r.item_id}, i);
    if (!inserted && r.timestamp < interactions[it->second].timestamp) {
      it->second = i;
    }
  }
  std::vector<bool> keep(interactions.size(), false);
  for (const auto& [key, i] : first) keep[i] = true;
  std::vector<RawInteraction> out;
  out.reserve(first.size());
  for (std::size_t i = 0; i < interactions.size(); ++i) {
    if (keep[i]) out.push_back(interactions[i]);
  }
  return out;
}

struct CoreFilterResult {
  std::vector<RawInteraction> interactions;
  std::optional<std::string> warning;
};

// k-core of the deduplicated bipartite graph: repeatedly drops users and
// items with fewer than k interactions until every survivor has >= k.
inline CoreFilterResult core_filter(const std::vector<RawInteraction>& input,
                                    int k) {
  if (k < 1) throw Error("core_filter: k must be >= 1");
  std::vector<RawInteraction> current = deduplicate(input);
  while (true) {
    std::unordered_map<std::string, int> user_deg, item_deg;
    for (const auto& r : current) {
      ++user_deg[r.user_id];
      ++item_deg[r.item_id];
    }
    std::vector<RawInteraction> next;
    next.reserve(current.size());
    for (const auto& r : current) {
      if (user_deg[r.user_id] >= k && item_deg[r.item_id] >= k) {
        next.push_back(r);
      }
    }
    if (next.size() == current.size()) break;
    current = std::move(next);
  }
  CoreFilterResult result{std::move(current), std::nullopt};
  if (result.interactions.empty()) {
    result.warning = "core filter with k=" + std::to_string(k) +
                     " removed every interaction";
  }
  return result;
}

// ---------------------------------------------------------------------------
// Entity text

enum class EntityKind { kUser, kItem };

inline std::string to_string(EntityKind kind) {
  return kind == EntityKind::kUser ? "user" : "item";
}

inline EntityKind entity_kind_from_string(const std::string& s) {
  if (s == "user") return EntityKind::kUser;
  if (s == "item") return EntityKind::kItem;
  throw Error("unknown entity kind '" + s + "'");
}

struct EntityText {
  std::string entity_id;
  EntityKind kind = EntityKind::kItem;
  std::vector<std::pair<std::string, std::string>> fields;

  bool operator==(const EntityText&) const = default;
};

inline const std::vector<std::string>& field_schema(EntityKind kind) {
  static const std::vector<std::string> kUserFields = {"reviews", "queries"};
  static const std::vector<std::string> kItemFields = {"title", "attributes",
                                                       "description"};
  return kind == EntityKind::kUser ? kUserFields : kItemFields;
}

inline bool in_schema(EntityKind kind, const std::string& field) {
  const auto& schema = field_schema(kind);
  return std::find(schema.begin(), schema.end(), field) != schema.end();
}

struct TextNormalization {
  // Whitespace-token budget per field.
  std::map<std::string, int> budgets = {{"title", 32},
                                        {"description", 96},
                                        {"attributes", 64},
                                        {"reviews", 64},
                                        {"queries", 64}};
  // Matches are deleted after lowercasing; compiled case-insensitive.
  std::vector<std::string> boilerplate;
};

namespace detail {

// Maps common non-ASCII punctuation (UTF-8) to ASCII. Other bytes pass
// through untouched.
inline std::string asciify_punctuation(const std::string& s) {
  static const std::vector<std::pair<std::string, std::string>> kMap = {
      {"\xE2\x80\x98", "'"},  {"\xE2\x80\x99", "'"},  {"\xE2\x80\x9A", "'"},
      {"\xE2\x80\xB2", "'"},  {"\xE2\x80\x9C", "\""}, {"\xE2\x80\x9D", "\""},
      {"\xE2\x80\x9E", "\""}, {"\xE2\x80\xB3", "\""}, {"\xC2\xAB", "\""},
      {"\xC2\xBB", "\""},     {"\xE2\x80\x93", "-"},  {"\xE2\x80\x94", "-"},
      {"\xE2\x80\x95", "-"},  {"\xE2\x88\x92", "-"},  {"\xE2\x80\xA2", "-"},
      {"\xE2\x80\xA6", "..."}, {"\xC2\xA0", " "}};
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    bool replaced = false;
    if (static_cast<unsigned char>(s[i]) >= 0x80) {
      for (const auto& [from, to] : kMap) {
        if (s.compare(i, from.size(), from) == 0) {
          out += to;
          i += from.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out.push_back(s[i++]);
  }
  return out;
}

inline std::vector<std::string> whitespace_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(std::move(tok));
  return out;
}

}  // namespace detail

inline std::string normalize_field(const std::string& text, int budget,
                                   const std::vector<std::regex>& boilerplate) {
  std::string s = detail::asciify_punctuation(text);
  for (char& c : s) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  for (const auto& re : boilerplate) s = std::regex_replace(s, re, " ");
  // Runs of one punctuation character collapse to a single occurrence.
  std::string collapsed;
  collapsed.reserve(s.size());
  for (char c : s) {
    const auto uc = static_cast<unsigned char>(c);
    if (uc < 0x80 && std::ispunct(uc) && !collapsed.empty() &&
        collapsed.back() == c) {
      continue;
    }
    collapsed.push_back(c);
  }
  auto tokens = detail::whitespace_tokens(collapsed);
  if (budget >= 0 && tokens.size() > static_cast<std::size_t>(budget)) {
    tokens.resize(static_cast<std::size_t>(budget));
  }
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

inline std::vector<std::regex> compile_boilerplate(
    const std::vector<std::string>& patterns) {
  std::vector<std::regex> out;
  for (const auto& p : patterns) {
    try {
      out.emplace_back(p, std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error& e) {
      throw Error("bad boilerplate pattern '" + p + "': " + e.what());
    }
  }
  return out;
}

inline EntityText normalize_text(const EntityText& entity,
                                 const TextNormalization& options) {
  const auto boilerplate = compile_boilerplate(options.boilerplate);
  EntityText out{entity.entity_id, entity.kind, {}};
  for (const auto& [name, text] : entity.fields) {
    auto it = options.budgets.find(name);
    if (it == options.budgets.end()) {
      throw Error("no token budget for field '" + name + "'");
    }
    out.fields.emplace_back(name, normalize_field(text, it->second, boilerplate));
  }
  return out;
}

// JSONL: {"id": ..., "kind": "user"|"item", "fields": {name: text, ...}}.
// Field order in the file is preserved.
inline std::vector<EntityText> load_texts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<EntityText> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    EntityText e;
    try {
      const auto j = nlohmann::ordered_json::parse(line);
      e.entity_id = j.at("id").get<std::string>();
      e.kind = entity_kind_from_string(j.at("kind").get<std::string>());
      for (const auto& [name, text] : j.at("fields").items()) {
        if (!in_schema(e.kind, name)) {
          throw ParseError(path, line_no,
                           "field '" + name + "' not in the " +
                               to_string(e.kind) + " schema");
        }
        e.fields.emplace_back(name, text.get<std::string>());
      }
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(path, line_no, ex.what());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& ex) {
      throw ParseError(path, line_no, ex.what());
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline void write_texts(std::ostream& out,
                        const std::vector<EntityText>& texts) {
  for (const auto& e : texts) {
    nlohmann::ordered_json j;
    j["id"] = e.entity_id;
    j["kind"] = to_string(e.kind);
    j["fields"] = nlohmann::ordered_json::object();
    for (const auto& [name, text] : e.fields) j["fields"][name] = text;
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Split

struct Vocab {
  std::vector<std::string> ids;
  std::unordered_map<std::string, Index> index;

  static Vocab from_sorted(std::vector<std::string> ids) {
    Vocab v;
    v.ids = std::move(ids);
    for (std::size_t i = 0; i < v.ids.size(); ++i) {
      v.index.emplace(v.ids[i], static_cast<Index>(i));
    }
    return v;
  }

  Index size() const { return static_cast<Index>(ids.size()); }

  std::optional<Index> find(const std::string& id) const {
    auto it = index.find(id);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
};

struct TrainInteraction {
  Index user = 0;
  Index item = 0;
  std::int64_t timestamp = 0;

  bool operator==(const TrainInteraction&) const = default;
};

struct HeldOut {
  Index item = 0;
  std::int64_t timestamp = 0;

  bool operator==(const HeldOut&) const = default;
};

// User and item indices are local to their own vocab; the joint node index
// of item i is num_users() + i.
struct DatasetSplit {
  std::vector<TrainInteraction> train;
  std::map<Index, HeldOut> validation;
  std::map<Index, HeldOut> test;
  Vocab user_vocab;
  Vocab item_vocab;
  std::set<Index> cold_items;
  int cold_threshold = 3;

  Index num_users() const { return user_vocab.size(); }
  Index num_items() const { return item_vocab.size(); }

  std::vector<Index> item_train_degrees() const {
    std::vector<Index> deg(static_cast<std::size_t>(num_items()), 0);
    for (const auto& t : train) ++deg[static_cast<std::size_t>(t.item)];
    return deg;
  }

  // Per user, training items sorted ascending.
  std::vector<std::vector<Index>> train_items_by_user() const {
    std::vector<std::vector<Index>> out(static_cast<std::size_t>(num_users()));
    for (const auto& t : train) out[static_cast<std::size_t>(t.user)].push_back(t.item);
    for (auto& v : out) std::sort(v.begin(), v.end());
    return out;
  }

  // Train + validation + test items of each user.
  std::vector<std::set<Index>> known_positives() const {
    std::vector<std::set<Index>> out(static_cast<std::size_t>(num_users()));
    for (const auto& t : train) out[static_cast<std::size_t>(t.user)].insert(t.item);
    for (const auto& [u, h] : validation) out[static_cast<std::size_t>(u)].insert(h.item);
    for (const auto& [u, h] : test) out[static_cast<std::size_t>(u)].insert(h.item);
    return out;
  }

  std::vector<std::pair<Index, Index>> train_pairs() const {
    std::vector<std::pair<Index, Index>> out;
    out.reserve(train.size());
    for (const auto& t : train) out.emplace_back(t.user, t.item);
    return out;
  }
};

inline std::set<Index> cold_items_from_train(const DatasetSplit& split) {
  std::set<Index> cold;
  const auto deg = split.item_train_degrees();
  for (std::size_t i = 0; i < deg.size(); ++i) {
    if (deg[i] <= split.cold_threshold) cold.insert(static_cast<Index>(i));
  }
  return cold;
}

// Chronological leave-one-out: per user the last interaction is the test
// item, the second to last the validation item, everything else trains.
// Users with fewer than three interactions train on all of them.
inline DatasetSplit build_split(const std::vector<RawInteraction>& input,
                                int cold_threshold = 3) {
  const auto interactions = deduplicate(input);
  std::set<std::string> users, items;
  for (const auto& r : interactions) {
    users.insert(r.user_id);
    items.insert(r.item_id);
  }
  DatasetSplit split;
  split.user_vocab = Vocab::from_sorted({users.begin(), users.end()});
  split.item_vocab = Vocab::from_sorted({items.begin(), items.end()});
  split.cold_threshold = cold_threshold;

  std::vector<std::vector<TrainInteraction>> per_user(users.size());
  for (const auto& r : interactions) {
    const Index u = split.user_vocab.index.at(r.user_id);
    const Index i = split.item_vocab.index.at(r.item_id);
    per_user[static_cast<std::size_t>(u)].push_back({u, i, r.timestamp});
  }
  for (auto& seq : per_user) {
    std::sort(seq.begin(), seq.end(), [](const auto& a, const auto& b) {
      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
      return a.item < b.item;
    });
    if (seq.size() >= 3) {
      const auto& last = seq[seq.size() - 1];
      const auto& second = seq[seq.size() - 2];
      split.test[last.user] = {last.item, last.timestamp};
      split.validation[second.user] = {second.item, second.timestamp};
      seq.resize(seq.size() - 2);
    }
    split.train.insert(split.train.end(), seq.begin(), seq.end());
  }
  if (split.test.empty()) {
    throw Error("build_split: no user has the 3 interactions needed for "
                "a validation and test holdout");
  }
  split.cold_items = cold_items_from_train(split);
  return split;
}

}  // namespace recmind
