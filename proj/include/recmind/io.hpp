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

// On-disk formats: split directories (JSON manifest + binary triples) and
// model checkpoints (JSON header + little-endian f64 blocks).

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "recmind/dataset.hpp"
#include "recmind/embed.hpp"
#include "recmind/hash.hpp"
#include "recmind/model.hpp"
#include "recmind/training.hpp"
#include "recmind/types.hpp"

namespace recmind {

inline std::string vocab_hash(const Vocab& users, const Vocab& items) {
  std::string buf = "users";
  for (const auto& id : users.ids) {
    buf.push_back('\x1f');
    buf += id;
  }
  buf += "\x1eitems";
  for (const auto& id : items.ids) {
    buf.push_back('\x1f');
    buf += id;
  }
  return short_hash(buf);
}

inline std::string vocab_hash(const DatasetSplit& split) {
  return vocab_hash(split.user_vocab, split.item_vocab);
}

// ---------------------------------------------------------------------------
// Split directory: split.json + split.bin

inline constexpr char kSplitMagic[4] = {'R', 'M', 'S', 'P'};
inline constexpr std::uint32_t kSplitVersion = 1;
inline constexpr const char* kSplitManifest = "split.json";
inline constexpr const char* kSplitBinary = "split.bin";

inline nlohmann::ordered_json split_stats(const DatasetSplit& split) {
  const double users = static_cast<double>(split.num_users());
  const double items = static_cast<double>(split.num_items());
  nlohmann::ordered_json j;
  j["users"] = split.num_users();
  j["items"] = split.num_items();
  j["train_edges"] = split.train.size();
  j["validation_users"] = split.validation.size();
  j["test_users"] = split.test.size();
  j["density"] = users * items > 0
                     ? static_cast<double>(split.train.size()) / (users * items)
                     : 0.0;
  j["cold_items"] = split.cold_items.size();
  Index min_user = -1, min_item = -1;
  {
    std::vector<Index> ud(static_cast<std::size_t>(split.num_users()), 0);
    std::vector<Index> id(static_cast<std::size_t>(split.num_items()), 0);
    auto bump = [&](Index u, Index i) {
      ++ud[static_cast<std::size_t>(u)];
      ++id[static_cast<std::size_t>(i)];
    };
    for (const auto& t : split.train) bump(t.user, t.item);
    for (const auto& [u, h] : split.validation) bump(u, h.item);
    for (const auto& [u, h] : split.test) bump(u, h.item);
    if (!ud.empty()) min_user = *std::min_element(ud.begin(), ud.end());
    if (!id.empty()) min_item = *std::min_element(id.begin(), id.end());
  }
  // Degrees over all retained interactions (before the holdout).
  j["min_user_interactions"] = min_user;
  j["min_item_interactions"] = min_item;
  return j;
}

inline void write_split(const std::string& dir, const DatasetSplit& split,
                        const nlohmann::ordered_json& config_echo = {}) {
  std::filesystem::create_directories(dir);
  std::string bin(kSplitMagic, 4);
  detail::put_le<std::uint32_t>(bin, kSplitVersion);
  auto put_triple = [&](Index u, Index i, std::int64_t ts) {
    detail::put_le<std::uint64_t>(bin, static_cast<std::uint64_t>(u));
    detail::put_le<std::uint64_t>(bin, static_cast<std::uint64_t>(i));
    detail::put_le<std::int64_t>(bin, ts);
  };
  detail::put_le<std::uint64_t>(bin, split.train.size());
  for (const auto& t : split.train) put_triple(t.user, t.item, t.timestamp);
  detail::put_le<std::uint64_t>(bin, split.validation.size());
  for (const auto& [u, h] : split.validation) put_triple(u, h.item, h.timestamp);
  detail::put_le<std::uint64_t>(bin, split.test.size());
  for (const auto& [u, h] : split.test) put_triple(u, h.item, h.timestamp);
  detail::write_all((std::filesystem::path(dir) / kSplitBinary).string(), bin);

  nlohmann::ordered_json j;
  j["format"] = "recmind-split";
  j["version"] = kSplitVersion;
  j["vocab_hash"] = vocab_hash(split);
  j["node_order"] = "users then items, each in vocab index order";
  j["stats"] = split_stats(split);
  j["cold_threshold"] = split.cold_threshold;
  std::vector<std::string> cold;
  for (Index i : split.cold_items) cold.push_back(split.item_vocab.ids[static_cast<std::size_t>(i)]);
  j["cold_items"] = cold;
  j["config"] = config_echo;
  j["user_ids"] = split.user_vocab.ids;
  j["item_ids"] = split.item_vocab.ids;
  std::ofstream out(std::filesystem::path(dir) / kSplitManifest);
  if (!out) throw IoError("cannot write " + dir + "/" + kSplitManifest);
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

inline DatasetSplit read_split(const std::string& dir) {
  const auto manifest_path = (std::filesystem::path(dir) / kSplitManifest).string();
  const auto j = read_json_file(manifest_path);
  DatasetSplit split;
  split.user_vocab = Vocab::from_sorted(j.at("user_ids").get<std::vector<std::string>>());
  split.item_vocab = Vocab::from_sorted(j.at("item_ids").get<std::vector<std::string>>());
  split.cold_threshold = j.at("cold_threshold").get<int>();
  if (j.at("vocab_hash").get<std::string>() != vocab_hash(split)) {
    throw IoError(manifest_path + ": vocab hash does not match the vocab lists");
  }

  const auto bin_path = (std::filesystem::path(dir) / kSplitBinary).string();
  const std::string bin = detail::read_all(bin_path);
  const auto* p = reinterpret_cast<const unsigned char*>(bin.data());
  std::size_t off = 0;
  auto need = [&](std::size_t n) {
    if (off + n > bin.size()) throw IoError(bin_path + ": truncated");
  };
  need(8);
  if (std::memcmp(p, kSplitMagic, 4) != 0) throw IoError(bin_path + ": bad magic");
  if (detail::get_le<std::uint32_t>(p + 4) != kSplitVersion) {
    throw IoError(bin_path + ": unsupported version");
  }
  off = 8;
  auto read_u64 = [&]() {
    need(8);
    const auto v = detail::get_le<std::uint64_t>(p + off);
    off += 8;
    return v;
  };
  auto read_triple = [&](Index& u, Index& i, std::int64_t& ts) {
    u = static_cast<Index>(read_u64());
    i = static_cast<Index>(read_u64());
    ts = static_cast<std::int64_t>(read_u64());
    if (u < 0 || u >= split.num_users() || i < 0 || i >= split.num_items()) {
      throw IoError(bin_path + ": index out of vocab range");
    }
  };
  const auto n_train = read_u64();
  split.train.resize(n_train);
  for (auto& t : split.train) read_triple(t.user, t.item, t.timestamp);
  for (auto* holdout : {&split.validation, &split.test}) {
    const auto n = read_u64();
    for (std::uint64_t k = 0; k < n; ++k) {
      Index u, i;
      std::int64_t ts;
      read_triple(u, i, ts);
      (*holdout)[u] = {i, ts};
    }
  }
  if (off != bin.size()) throw IoError(bin_path + ": trailing bytes");
  split.cold_items = cold_items_from_train(split);
  return split;
}

inline std::string read_split_vocab_hash(const std::string& dir) {
  return read_json_file((std::filesystem::path(dir) / kSplitManifest).string())
      .at("vocab_hash")
      .get<std::string>();
}

// Optional sidecar next to an RMEB file carrying the vocab hash it was
// written for; RMEB itself is positional and has no room for it.
inline std::string embedding_sidecar_path(const std::string& rmeb_path) {
  return rmeb_path + ".meta.json";
}

// ---------------------------------------------------------------------------
// Checkpoint: "RMCK" | u32 version | u64 header bytes | JSON header |
//             f64 E0 (nodes x d) | f64 w (2d+1) | f64 b | f64 alpha_logit |
//             f64 projection (d x dim_in), all little-endian, row-major.

inline constexpr char kCheckpointMagic[4] = {'R', 'M', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams<double> params;
  nlohmann::json header;
};

template <typename Scalar>
void write_checkpoint(const std::string& path, const ModelParams<Scalar>& params,
                      const TrainConfig& config, const std::string& vocab,
                      const TrainState<Scalar>* state = nullptr) {
  const auto p = params.template cast<double>();
  nlohmann::ordered_json header;
  header["nodes"] = p.num_nodes();
  header["dim"] = p.dim();
  header["dim_in"] = p.projection.weight.cols();
  header["layers"] = config.effective_layers();
  header["alpha"] = fusion_options<double>(config).pinned_alpha.value_or(p.alpha());
  header["config_hash"] = config_hash(config);
  header["vocab_hash"] = vocab;
  header["config"] = to_json(config);
  if (state != nullptr) {
    header["state"] = {{"epoch", state->epoch},
                       {"best_validation_ndcg10", state->best_validation_ndcg10},
                       {"epochs_since_improvement", state->epochs_since_improvement},
                       {"has_best", state->has_best},
                       {"rng_state", state->rng_state}};
  }
  const std::string header_bytes = header.dump();
  std::string out(kCheckpointMagic, 4);
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint64_t>(out, header_bytes.size());
  out += header_bytes;
  auto put = [&](double v) {
    detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  };
  for (Index k = 0; k < p.base_embeddings.size(); ++k) put(p.base_embeddings.data()[k]);
  for (Index k = 0; k < p.gate_weight.size(); ++k) put(p.gate_weight[k]);
  put(p.gate_bias);
  put(p.alpha_logit);
  for (Index k = 0; k < p.projection.weight.size(); ++k) put(p.projection.weight.data()[k]);
  detail::write_all(path, out);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  const std::string bytes = detail::read_all(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 16 || std::memcmp(p, kCheckpointMagic, 4) != 0) {
    throw IoError(path + ": not a checkpoint");
  }
  if (detail::get_le<std::uint32_t>(p + 4) != kCheckpointVersion) {
    throw IoError(path + ": unsupported checkpoint version");
  }
  const auto header_len = detail::get_le<std::uint64_t>(p + 8);
  if (16 + header_len > bytes.size()) throw IoError(path + ": truncated header");
  Checkpoint ck;
  try {
    ck.header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  const Index nodes = ck.header.at("nodes").get<Index>();
  const Index dim = ck.header.at("dim").get<Index>();
  const Index dim_in = ck.header.at("dim_in").get<Index>();
  const std::size_t count = static_cast<std::size_t>(nodes * dim + 2 * dim + 1 + 2 + dim * dim_in);
  std::size_t off = 16 + header_len;
  if (bytes.size() != off + 8 * count) throw IoError(path + ": payload size mismatch");
  auto get = [&]() {
    const double v = std::bit_cast<double>(detail::get_le<std::uint64_t>(p + off));
    off += 8;
    return v;
  };
  auto& params = ck.params;
  params.base_embeddings.resize(nodes, dim);
  for (Index k = 0; k < params.base_embeddings.size(); ++k) params.base_embeddings.data()[k] = get();
  params.gate_weight.resize(2 * dim + 1);
  for (Index k = 0; k < params.gate_weight.size(); ++k) params.gate_weight[k] = get();
  params.gate_bias = get();
  params.alpha_logit = get();
  params.projection.weight.resize(dim, dim_in);
  for (Index k = 0; k < params.projection.weight.size(); ++k) {
    params.projection.weight.data()[k] = get();
  }
  if (!params.all_finite()) throw IoError(path + ": non-finite parameters");
  return ck;
}

template <typename Scalar>
TrainState<Scalar> state_from_checkpoint(const Checkpoint& ck,
                                         const Checkpoint* best = nullptr) {
  TrainState<Scalar> s;
  s.params = ck.params.cast<Scalar>();
  s.best_params = best ? best->params.cast<Scalar>() : s.params;
  if (ck.header.contains("state")) {
    const auto& j = ck.header["state"];
    s.epoch = j.at("epoch").get<int>();
    s.best_validation_ndcg10 = j.at("best_validation_ndcg10").get<double>();
    s.epochs_since_improvement = j.at("epochs_since_improvement").get<int>();
    s.has_best = j.at("has_best").get<bool>();
    s.rng_state = j.at("rng_state").get<std::string>();
  }
  return s;
}

}  // namespace recmind
