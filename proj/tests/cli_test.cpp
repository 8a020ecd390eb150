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

// End-to-end runs of the recmind binary.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "recmind/recmind.hpp"

namespace recmind {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const auto log = fs::temp_directory_path() / ("recmind_cli_" + std::to_string(getpid()) + ".out");
  const std::string cmd = std::string(RECMIND_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// One synthetic dataset, split and embedding file shared by every test.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    // ctest runs each case in its own process, possibly concurrently.
    root_ = fs::temp_directory_path() / ("recmind_cli_" + std::to_string(getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    ASSERT_EQ(run("synth --seed 3 --out " + p("raw")).code, 0);
    ASSERT_EQ(run("prepare --interactions " + p("raw/interactions.tsv") + " --texts " +
                  p("raw/texts.jsonl") + " --k 5 --out " + p("split"))
                  .code,
              0);
    ASSERT_EQ(run("embed-fallback --split " + p("split") + " --texts " + p("split/texts.jsonl") +
                  " --dim-in 32 --out " + p("emb.rmeb"))
                  .code,
              0);
  }

  static std::string p(const std::string& rel) { return (root_ / rel).string(); }

  static std::string train_args(const std::string& out) {
    return "train --split " + p("split") + " --embeddings " + p("emb.rmeb") +
           " --dim 16 --batch-users 64 --warmup-epochs 2 --patience 50 --out " + p(out);
  }

  static void TearDownTestSuite() { fs::remove_all(root_); }

  static inline fs::path root_;
};

TEST_F(CliTest, MissingInputExitsTwoAndNamesPath) {
  const auto r = run("prepare --interactions " + p("nope.tsv") + " --out " + p("x"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("nope.tsv"), std::string::npos);
}

TEST_F(CliTest, UnknownSubcommandExitsTwo) {
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_NE(run("").code, 0);
}

TEST_F(CliTest, PrepareManifestHashesOutputs) {
  const auto m = read_json_file(p("split/manifest.json"));
  EXPECT_EQ(m["command"], "prepare");
  EXPECT_EQ(m["core_k"], 5);
  EXPECT_TRUE(m["core_satisfied"].get<bool>());
  EXPECT_GE(m["dataset"]["min_user_interactions"].get<Index>(), 5);
  EXPECT_GE(m["dataset"]["min_item_interactions"].get<Index>(), 5);
  ASSERT_FALSE(m["outputs"].empty());
  for (const auto& o : m["outputs"]) {
    EXPECT_EQ(o["sha256"], sha256_file(p("split/" + o["path"].get<std::string>())));
  }
  EXPECT_EQ(m["vocab_hash"], vocab_hash(read_split(p("split"))));
}

TEST_F(CliTest, EmbedIsByteDeterministicAndCoversVocab) {
  ASSERT_EQ(run("embed-fallback --split " + p("split") + " --texts " + p("split/texts.jsonl") +
                " --dim-in 32 --out " + p("emb2.rmeb"))
                .code,
            0);
  EXPECT_EQ(slurp(p("emb.rmeb")), slurp(p("emb2.rmeb")));
  const auto split = read_split(p("split"));
  const auto store = load_embedding_file(p("emb.rmeb"), split.num_users() + split.num_items());
  EXPECT_EQ(store.dim_in, 32);
}

TEST_F(CliTest, EmbedWithoutTextsGivesZeroRows) {
  ASSERT_EQ(run("embed-fallback --split " + p("split") + " --dim-in 8 --out " + p("bare.rmeb")).code,
            0);
  const auto split = read_split(p("split"));
  const auto store = load_embedding_file(p("bare.rmeb"), split.num_users() + split.num_items());
  for (bool t : store.has_text) EXPECT_FALSE(t);
  EXPECT_EQ(store.vectors.norm(), 0.0f);
}

TEST_F(CliTest, ZeroEpochsWritesInitialParameters) {
  ASSERT_EQ(run(train_args("run0") + " --max-epochs 0").code, 0);
  const auto ck = read_checkpoint(p("run0/best.ckpt"));
  const auto init = init_params<double>(ck.params.num_nodes(), 16, 32,
                                        TrainConfig{}.seed);
  EXPECT_EQ(ck.params.base_embeddings, init.base_embeddings);
  EXPECT_TRUE(lines_of(p("run0/train_log.jsonl")).empty());
}

TEST_F(CliTest, VocabMismatchFailsBeforeTraining) {
  const auto other = root_ / "other";
  fs::create_directories(other);
  {
    std::ofstream tsv(other / "i.tsv");
    for (int u = 0; u < 6; ++u) {
      for (int i = 0; i < 6; ++i) tsv << "x" << u << "\ty" << i << "\t" << i << "\n";
    }
  }
  ASSERT_EQ(run("prepare --interactions " + (other / "i.tsv").string() + " --k 2 --out " +
                (other / "split").string())
                .code,
            0);
  const auto r = run("train --split " + (other / "split").string() + " --embeddings " +
                     p("emb.rmeb") + " --out " + p("mismatch"));
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(p("mismatch/best.ckpt")));
}

TEST_F(CliTest, LlmOnlyHeader) {
  ASSERT_EQ(run(train_args("llm") + " --max-epochs 2 --llm-only").code, 0);
  const auto ck = read_checkpoint(p("llm/best.ckpt"));
  EXPECT_EQ(ck.header["layers"], 0);
  EXPECT_EQ(ck.header["alpha"], 0.0);
}

TEST_F(CliTest, ResumeContinuesLog) {
  ASSERT_EQ(run(train_args("resume") + " --max-epochs 3").code, 0);
  ASSERT_EQ(lines_of(p("resume/train_log.jsonl")).size(), 3u);
  ASSERT_EQ(run(train_args("resume") + " --max-epochs 5 --resume " + p("resume/last.ckpt")).code,
            0);
  const auto lines = lines_of(p("resume/train_log.jsonl"));
  ASSERT_EQ(lines.size(), 5u);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    EXPECT_EQ(nlohmann::json::parse(lines[k])["epoch"], static_cast<int>(k));
  }
}

TEST_F(CliTest, EvalColumnsModesAndBaseline) {
  ASSERT_EQ(run(train_args("full") + " --max-epochs 4").code, 0);
  const std::string common = "eval --checkpoint " + p("full/best.ckpt") + " --split " +
                             p("split") + " --embeddings " + p("emb.rmeb");
  ASSERT_EQ(run(common + " --out " + p("ev_default")).code, 0);
  const auto def = read_json_file(p("ev_default/report.json"));
  for (const char* key : {"recall@10", "recall@20", "recall@40", "ndcg@10", "ndcg@20", "ndcg@40"}) {
    EXPECT_TRUE(def["overall"].contains(key)) << key;
  }
  EXPECT_EQ(def["mode"], "sampled");

  ASSERT_EQ(run(common + " --k 20,40 --out " + p("ev_k")).code, 0);
  const auto md = lines_of(p("ev_k/report.md"));
  ASSERT_FALSE(md.empty());
  EXPECT_EQ(md[0], "| Model | Recall@20 | Recall@40 | NDCG@20 | NDCG@40 |");

  ASSERT_EQ(run(common + " --full-ranking --out " + p("ev_full")).code, 0);
  EXPECT_EQ(read_json_file(p("ev_full/report.json"))["mode"], "full");

  ASSERT_EQ(run(common + " --baseline " + p("ev_default/report.json") + " --out " + p("ev_base"))
                .code,
            0);
  EXPECT_NE(slurp(p("ev_base/report.md")).find("| Improve |"), std::string::npos);

  const auto shown = run("inspect " + p("ev_default"));
  EXPECT_EQ(shown.code, 0);
  EXPECT_NE(shown.out.find("\"command\": \"eval\""), std::string::npos);
}

}  // namespace
}  // namespace recmind
