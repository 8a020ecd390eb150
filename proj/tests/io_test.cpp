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

#include <filesystem>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace recmind {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("recmind_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(SplitFiles, RoundTrip) {
  const auto split = testing::random_split(40, 60, 6, 3);
  const auto dir = fresh_dir("split");
  write_split(dir.string(), split, {{"core_k", 5}});
  const auto back = read_split(dir.string());
  EXPECT_EQ(back.train, split.train);
  EXPECT_EQ(back.validation, split.validation);
  EXPECT_EQ(back.test, split.test);
  EXPECT_EQ(back.user_vocab.ids, split.user_vocab.ids);
  EXPECT_EQ(back.item_vocab.ids, split.item_vocab.ids);
  EXPECT_EQ(back.cold_items, split.cold_items);
  EXPECT_EQ(vocab_hash(back), vocab_hash(split));
  EXPECT_EQ(read_split_vocab_hash(dir.string()), vocab_hash(split));
}

TEST(SplitFiles, CorruptBinaryRejected) {
  const auto split = testing::random_split(10, 30, 4, 4);
  const auto dir = fresh_dir("corrupt");
  write_split(dir.string(), split, {});
  const auto bin = (dir / kSplitBinary).string();
  auto bytes = detail::read_all(bin);
  bytes.resize(bytes.size() - 5);
  detail::write_all(bin, bytes);
  EXPECT_THROW(read_split(dir.string()), IoError);
}

TEST(SplitFiles, VocabHashDependsOnIds) {
  const auto a = testing::random_split(10, 30, 4, 5);
  auto b = a;
  b.item_vocab = Vocab::from_sorted({"x"});
  EXPECT_NE(vocab_hash(a), vocab_hash(b));
}

TEST(Stats, CountsAndDensity) {
  const auto split = testing::random_split(10, 20, 5, 6);
  const auto s = split_stats(split);
  EXPECT_EQ(s["users"].get<Index>(), 10);
  EXPECT_EQ(s["train_edges"].get<std::size_t>(), split.train.size());
  EXPECT_NEAR(s["density"].get<double>(), static_cast<double>(split.train.size()) /
                  static_cast<double>(10 * split.num_items()),
              1e-12);
}

TEST(Checkpoint, RoundTripWithState) {
  auto params = init_params<double>(12, 4, 3, 9);
  params.gate_weight.setRandom();
  params.gate_bias = 0.25;
  params.alpha_logit = -0.5;
  TrainConfig config;
  config.dim = 4;
  TrainState<double> state;
  state.params = params;
  state.epoch = 7;
  state.best_validation_ndcg10 = 0.4;
  state.epochs_since_improvement = 2;
  state.has_best = true;
  state.rng_state = "1 2 3";
  const auto path = (fresh_dir("ckpt") / "last.ckpt").string();
  write_checkpoint(path, params, config, "abc", &state);
  const auto ck = read_checkpoint(path);
  EXPECT_EQ(ck.params.base_embeddings, params.base_embeddings);
  EXPECT_EQ(ck.params.gate_weight, params.gate_weight);
  EXPECT_EQ(ck.params.gate_bias, 0.25);
  EXPECT_EQ(ck.params.alpha_logit, -0.5);
  EXPECT_EQ(ck.params.projection.weight, params.projection.weight);
  EXPECT_EQ(ck.header["vocab_hash"], "abc");
  EXPECT_EQ(ck.header["config_hash"], config_hash(config));
  const auto back = state_from_checkpoint<double>(ck);
  EXPECT_EQ(back.epoch, 7);
  EXPECT_EQ(back.epochs_since_improvement, 2);
  EXPECT_TRUE(back.has_best);
  EXPECT_EQ(back.rng_state, "1 2 3");
}

TEST(Checkpoint, TruncatedRejected) {
  const auto params = init_params<double>(4, 2, 2, 1);
  const auto path = (fresh_dir("ckpt_bad") / "x.ckpt").string();
  write_checkpoint(path, params, TrainConfig{}, "v");
  auto bytes = detail::read_all(path);
  bytes.pop_back();
  detail::write_all(path, bytes);
  EXPECT_THROW(read_checkpoint(path), IoError);
}

}  // namespace
}  // namespace recmind
