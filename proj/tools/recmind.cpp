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

// recmind: prepare -> embed-fallback -> train -> eval, plus inspect and a
// synthetic data generator.
//
// Exit codes: 0 success, 1 internal error, 2 usage or IO error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "recmind/recmind.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

class Timer {
 public:
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

ordered_json component_versions() {
  return {{"recmind", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                        std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"rmeb_version", recmind::kRmebVersion},
          {"checkpoint_version", recmind::kCheckpointVersion}};
}

// One manifest.json per output directory; every listed output carries its
// SHA-256.
void write_manifest(const std::string& dir, ordered_json manifest,
                    const std::vector<std::string>& outputs) {
  manifest["component_versions"] = component_versions();
  ordered_json files = ordered_json::array();
  for (const auto& path : outputs) {
    files.push_back({{"path", fs::path(path).filename().string()},
                     {"sha256", recmind::sha256_file(path)}});
  }
  manifest["outputs"] = files;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw recmind::IoError("cannot write manifest in " + dir);
  out << manifest.dump(2) << '\n';
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw recmind::IoError("cannot write " + path);
  out << text;
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw recmind::IoError("no such file: " + path);
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareArgs {
  std::string interactions;
  std::string format;
  std::string texts;
  int k = 5;
  int cold_threshold = 3;
  std::vector<std::string> boilerplate;
  std::string out;
};

int run_prepare(const PrepareArgs& a) {
  Timer timer;
  require_file(a.interactions);
  const auto format = a.format.empty() ? recmind::format_from_path(a.interactions)
                      : a.format == "jsonl" ? recmind::InteractionFormat::kJsonl
                                            : recmind::InteractionFormat::kTsv;
  const auto raw = recmind::load_interactions(a.interactions, format);
  const double load_ms = timer.elapsed_ms();
  const auto filtered = recmind::core_filter(raw, a.k);
  if (filtered.warning) std::cerr << "warning: " << *filtered.warning << '\n';
  const auto split = recmind::build_split(filtered.interactions, a.cold_threshold);
  const double split_ms = timer.elapsed_ms() - load_ms;

  ordered_json config = {{"interactions", a.interactions},
                         {"format", format == recmind::InteractionFormat::kTsv ? "tsv" : "jsonl"},
                         {"core_k", a.k},
                         {"cold_threshold", a.cold_threshold},
                         {"boilerplate", a.boilerplate}};
  fs::create_directories(a.out);
  recmind::write_split(a.out, split, config);
  std::vector<std::string> outputs = {(fs::path(a.out) / recmind::kSplitManifest).string(),
                                      (fs::path(a.out) / recmind::kSplitBinary).string()};

  std::size_t texts_written = 0;
  if (!a.texts.empty()) {
    require_file(a.texts);
    recmind::TextNormalization norm;
    norm.boilerplate = a.boilerplate;
    std::vector<recmind::EntityText> kept;
    for (const auto& e : recmind::load_texts(a.texts)) {
      const auto& vocab = e.kind == recmind::EntityKind::kUser ? split.user_vocab
                                                               : split.item_vocab;
      if (!vocab.find(e.entity_id)) continue;
      kept.push_back(recmind::normalize_text(e, norm));
    }
    const auto path = (fs::path(a.out) / "texts.jsonl").string();
    std::ofstream out(path);
    recmind::write_texts(out, kept);
    out.close();
    outputs.push_back(path);
    texts_written = kept.size();
  }

  auto stats = recmind::split_stats(split);
  stats["raw_interactions"] = raw.size();
  stats["filtered_interactions"] = filtered.interactions.size();
  stats["normalized_texts"] = texts_written;
  ordered_json manifest;
  manifest["command"] = "prepare";
  manifest["config"] = config;
  manifest["config_hash"] = recmind::short_hash(config.dump());
  manifest["vocab_hash"] = recmind::vocab_hash(split);
  manifest["dataset"] = stats;
  manifest["core_k"] = a.k;
  manifest["core_satisfied"] =
      stats["min_user_interactions"].get<recmind::Index>() >= a.k &&
      stats["min_item_interactions"].get<recmind::Index>() >= a.k;
  manifest["seeds"] = ordered_json::object();
  manifest["wall_ms"] = {{"load", load_ms}, {"filter_split", split_ms},
                         {"total", timer.elapsed_ms()}};
  write_manifest(a.out, manifest, outputs);
  std::cout << "prepared " << split.num_users() << " users, " << split.num_items()
            << " items, " << split.train.size() << " train edges, "
            << split.test.size() << " test users -> " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// embed-fallback

struct EmbedArgs {
  std::string split;
  std::string texts;
  std::string features;
  int dim_in = 64;
  std::uint64_t seed = 13;
  std::string out;
};

int run_embed_fallback(const EmbedArgs& a) {
  const auto split = recmind::read_split(a.split);
  const recmind::Index nu = split.num_users();
  const recmind::Index n = nu + split.num_items();
  recmind::LanguageEmbeddingStore store;
  store.dim_in = a.dim_in;
  store.vectors = recmind::MatrixXf::Zero(n, a.dim_in);
  store.has_text.assign(static_cast<std::size_t>(n), false);
  store.source = recmind::EmbeddingSource::kHashedFallback;

  auto node_of = [&](recmind::EntityKind kind,
                     const std::string& id) -> std::optional<recmind::Index> {
    if (kind == recmind::EntityKind::kUser) return split.user_vocab.find(id);
    if (auto i = split.item_vocab.find(id)) return nu + *i;
    return std::nullopt;
  };

  std::size_t unknown = 0;
  if (!a.texts.empty()) {
    require_file(a.texts);
    const recmind::TextNormalization norm;
    for (const auto& e : recmind::load_texts(a.texts)) {
      const auto node = node_of(e.kind, e.entity_id);
      if (!node) {
        ++unknown;
        continue;
      }
      const auto normalized = recmind::normalize_text(e, norm);
      const auto v = recmind::hashed_fallback_encode(normalized, a.dim_in, a.seed);
      if (v.squaredNorm() == 0) continue;
      store.vectors.row(*node) = v.transpose();
      store.has_text[static_cast<std::size_t>(*node)] = true;
    }
  }
  if (unknown > 0) {
    std::cerr << "warning: " << unknown << " text records name entities outside the vocab\n";
  }

  std::size_t structured = 0;
  if (!a.features.empty()) {
    // JSONL: {"id", "kind", "values": [...]}; used only for rows without text.
    require_file(a.features);
    std::ifstream in(a.features);
    std::string line;
    std::optional<recmind::StructuredMlpEncoder> mlp;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& ex) {
        throw recmind::ParseError(a.features, line_no, ex.what());
      }
      const auto values = j.at("values").get<std::vector<double>>();
      if (!mlp) {
        mlp.emplace(static_cast<recmind::Index>(values.size()), a.dim_in, a.dim_in, a.seed);
      }
      const auto node = node_of(recmind::entity_kind_from_string(j.at("kind").get<std::string>()),
                                j.at("id").get<std::string>());
      if (!node || store.has_text[static_cast<std::size_t>(*node)]) continue;
      const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(
          values.data(), static_cast<Eigen::Index>(values.size()));
      store.vectors.row(*node) = mlp->encode(x).transpose();
      ++structured;
    }
    if (structured > 0) store.source = recmind::EmbeddingSource::kStructuredMlp;
  }

  recmind::check_finite(store);
  if (const auto parent = fs::path(a.out).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  recmind::write_embedding_file(a.out, store);
  std::size_t present = 0;
  for (bool b : store.has_text) present += b;
  ordered_json meta = {{"vocab_hash", recmind::vocab_hash(split)},
                       {"entities", n},
                       {"dim_in", a.dim_in},
                       {"source", recmind::to_string(store.source)},
                       {"seed", a.seed},
                       {"with_text", present},
                       {"structured_rows", structured},
                       {"sha256", recmind::sha256_file(a.out)}};
  write_text_file(recmind::embedding_sidecar_path(a.out), meta.dump(2) + "\n");
  std::cout << "wrote " << n << " rows (" << present << " with text) -> " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// train / eval shared loading

struct Inputs {
  recmind::DatasetSplit split;
  recmind::InteractionGraph graph;
  recmind::LanguageEmbeddingStore language;
  std::string vocab_hash;
};

Inputs load_inputs(const std::string& split_dir, const std::string& embeddings) {
  Inputs in;
  in.split = recmind::read_split(split_dir);
  in.vocab_hash = recmind::vocab_hash(in.split);
  const auto sidecar = recmind::embedding_sidecar_path(embeddings);
  if (fs::exists(sidecar)) {
    const auto meta = recmind::read_json_file(sidecar);
    if (meta.contains("vocab_hash") &&
        meta["vocab_hash"].get<std::string>() != in.vocab_hash) {
      throw recmind::IoError("vocab hash mismatch: split " + in.vocab_hash +
                             ", embedding file " + meta["vocab_hash"].get<std::string>());
    }
  }
  in.language = recmind::load_embedding_file(
      embeddings, in.split.num_users() + in.split.num_items());
  in.graph = recmind::build_graph(in.split.train_pairs(), in.split.num_users(),
                                  in.split.num_items());
  return in;
}

ordered_json graph_stats(const recmind::InteractionGraph& g) {
  std::map<recmind::Index, recmind::Index> hist;
  recmind::Index max_deg = 0;
  for (auto d : g.degrees) {
    ++hist[d];
    max_deg = std::max(max_deg, d);
  }
  ordered_json h = ordered_json::object();
  for (const auto& [d, c] : hist) h[std::to_string(d)] = c;
  return {{"nodes", g.num_nodes()},
          {"edges", g.num_edges()},
          {"max_degree", max_deg},
          {"degree_norm_constant", g.degree_norm_constant},
          {"degree_histogram", h}};
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string split;
  std::string embeddings;
  std::string config;
  std::string out;
  std::string resume;
  std::map<std::string, std::string> overrides;
  bool llm_only = false, no_align_users = false, no_align_items = false, graph_only = false;
};

template <typename Scalar>
int train_typed(const TrainArgs& a, const recmind::TrainConfig& config, const Inputs& in,
                Timer& timer, double load_ms) {
  std::optional<recmind::TrainState<Scalar>> resume;
  if (!a.resume.empty()) {
    require_file(a.resume);
    const auto ck = recmind::read_checkpoint(a.resume);
    if (ck.header.at("vocab_hash").get<std::string>() != in.vocab_hash) {
      throw recmind::IoError("resume checkpoint was trained on a different vocab");
    }
    const auto best_path = fs::path(a.resume).parent_path() / "best.ckpt";
    std::optional<recmind::Checkpoint> best;
    if (fs::exists(best_path)) best = recmind::read_checkpoint(best_path.string());
    resume = recmind::state_from_checkpoint<Scalar>(ck, best ? &*best : nullptr);
  }
  const bool append = resume.has_value();
  fs::create_directories(a.out);
  const auto log_path = (fs::path(a.out) / "train_log.jsonl").string();
  std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
  if (!log) throw recmind::IoError("cannot write " + log_path);

  auto result = recmind::train<Scalar>(
      in.split, in.graph, in.language, config, std::move(resume),
      [&](const recmind::EpochLog& e) {
        log << recmind::to_json(e).dump() << '\n';
        log.flush();
        std::cerr << "epoch " << e.epoch << " [" << e.phase << "] total=" << e.total
                  << " cf=" << e.cf << " align_u=" << e.align_u << " align_i=" << e.align_i;
        if (e.val_ndcg10) std::cerr << " val_ndcg@10=" << *e.val_ndcg10;
        std::cerr << '\n';
      });
  log.close();
  const double train_ms = timer.elapsed_ms() - load_ms;

  const auto best_path = (fs::path(a.out) / "best.ckpt").string();
  const auto last_path = (fs::path(a.out) / "last.ckpt").string();
  recmind::write_checkpoint(best_path, result.params, config, in.vocab_hash);
  recmind::write_checkpoint(last_path, result.state.params, config, in.vocab_hash, &result.state);
  const auto config_path = (fs::path(a.out) / "config.json").string();
  write_text_file(config_path, recmind::to_json(config).dump(2) + "\n");

  ordered_json manifest;
  manifest["command"] = "train";
  manifest["config"] = recmind::to_json(config);
  manifest["config_hash"] = recmind::config_hash(config);
  manifest["vocab_hash"] = in.vocab_hash;
  manifest["dataset"] = recmind::split_stats(in.split);
  manifest["graph"] = graph_stats(in.graph);
  manifest["seeds"] = {{"train", config.seed}};
  manifest["inputs"] = {{"split", a.split}, {"embeddings", a.embeddings},
                        {"embeddings_sha256", recmind::sha256_file(a.embeddings)},
                        {"resume", a.resume}};
  manifest["epochs_run"] = result.log.size();
  manifest["next_epoch"] = result.state.epoch;
  manifest["stopped_early"] = result.stopped_early;
  manifest["best_validation_ndcg10"] =
      result.state.has_best ? ordered_json(result.state.best_validation_ndcg10) : ordered_json(nullptr);
  manifest["wall_ms"] = {{"load", load_ms}, {"train", train_ms}, {"total", timer.elapsed_ms()}};
  write_manifest(a.out, manifest, {best_path, last_path, log_path, config_path});
  std::cout << "trained " << result.log.size() << " epochs -> " << a.out << '\n';
  return 0;
}

int run_train(const TrainArgs& a) {
  Timer timer;
  require_file(a.embeddings);
  // Flags first, then the JSON config on top.
  nlohmann::json flags = nlohmann::json::object();
  for (const auto& [key, value] : a.overrides) {
    if (value.empty()) continue;
    try {
      flags[key] = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
      flags[key] = value;
    }
  }
  recmind::TrainConfig config = recmind::train_config_from_json(flags);
  config.ablation.llm_only |= a.llm_only;
  config.ablation.no_align_users |= a.no_align_users;
  config.ablation.no_align_items |= a.no_align_items;
  config.ablation.graph_only |= a.graph_only;
  if (!a.config.empty()) {
    require_file(a.config);
    config = recmind::train_config_from_json(recmind::read_json_file(a.config), config);
  }
  config.validate();
  const auto in = load_inputs(a.split, a.embeddings);
  const double load_ms = timer.elapsed_ms();
  if (config.precision == "f32") return train_typed<float>(a, config, in, timer, load_ms);
  return train_typed<double>(a, config, in, timer, load_ms);
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string checkpoint;
  std::string split;
  std::string embeddings;
  std::string which = "test";
  std::string k = "10,20,40";
  recmind::Index negatives = 100;
  bool full_ranking = false;
  std::string strata = "3";
  std::uint64_t seed = 2024;
  std::string baseline;
  std::string name = "RecMind";
  std::string out;
};

std::vector<recmind::Index> parse_list(const std::string& s, const char* what) {
  std::vector<recmind::Index> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stoll(tok));
    } catch (const std::exception&) {
      throw CLI::ValidationError(std::string("bad ") + what + " list '" + s + "'");
    }
  }
  return out;
}

int run_eval(const EvalArgs& a) {
  Timer timer;
  require_file(a.checkpoint);
  require_file(a.embeddings);
  const auto ck = recmind::read_checkpoint(a.checkpoint);
  const auto in = load_inputs(a.split, a.embeddings);
  if (ck.header.at("vocab_hash").get<std::string>() != in.vocab_hash) {
    throw recmind::IoError("checkpoint vocab hash does not match the split");
  }
  if (ck.params.num_nodes() != in.graph.num_nodes() ||
      ck.params.projection.weight.cols() != in.language.dim_in) {
    throw recmind::IoError("checkpoint shape does not match split/embeddings");
  }
  const auto config = recmind::train_config_from_json(ck.header.at("config"));

  recmind::EvalProtocol protocol;
  protocol.k_values = parse_list(a.k, "K");
  protocol.num_sampled_negatives = a.negatives;
  protocol.full_ranking = a.full_ranking;
  protocol.strata = parse_list(a.strata, "strata");
  protocol.seed = a.seed;
  const auto which = a.which == "validation" ? recmind::Holdout::kValidation
                                             : recmind::Holdout::kTest;

  const auto zl = recmind::project(in.language, ck.params.projection);
  auto report = recmind::evaluate(ck.params, in.graph, zl, config.effective_layers(),
                                  recmind::fusion_options<double>(config), in.split,
                                  which, protocol);
  std::optional<recmind::EvalReport> baseline;
  if (!a.baseline.empty()) {
    require_file(a.baseline);
    const auto bj = recmind::read_json_file(a.baseline);
    baseline = recmind::eval_report_from_json(bj);
    recmind::attach_baseline(report, *baseline,
                             bj.value("name", fs::path(a.baseline).parent_path().filename().string()));
  }
  fs::create_directories(a.out);
  auto j = recmind::to_json(report);
  j["name"] = a.name;
  j["checkpoint_config_hash"] = ck.header.at("config_hash");
  const auto json_path = (fs::path(a.out) / "report.json").string();
  const auto md_path = (fs::path(a.out) / "report.md").string();
  write_text_file(json_path, j.dump(2) + "\n");
  write_text_file(md_path, recmind::to_markdown(report, a.name, baseline ? &*baseline : nullptr));

  ordered_json manifest;
  manifest["command"] = "eval";
  manifest["config"] = recmind::to_json(protocol);
  manifest["config_hash"] = recmind::short_hash(recmind::to_json(protocol).dump());
  manifest["vocab_hash"] = in.vocab_hash;
  manifest["dataset"] = recmind::split_stats(in.split);
  manifest["seeds"] = {{"eval", a.seed}};
  manifest["inputs"] = {{"checkpoint", a.checkpoint},
                        {"checkpoint_sha256", recmind::sha256_file(a.checkpoint)},
                        {"split", a.split},
                        {"embeddings", a.embeddings}};
  manifest["wall_ms"] = {{"total", timer.elapsed_ms()}};
  write_manifest(a.out, manifest, {json_path, md_path});
  std::cout << recmind::to_markdown(report, a.name, baseline ? &*baseline : nullptr);
  return 0;
}

// ---------------------------------------------------------------------------
// inspect / synth

int run_inspect(const std::string& target) {
  fs::path path = target;
  if (fs::is_directory(path)) path /= "manifest.json";
  require_file(path.string());
  std::cout << recmind::read_json_file(path.string()).dump(2) << '\n';
  return 0;
}

struct SynthArgs {
  std::uint64_t seed = 11;
  std::string out;
};

// Interactions from the cold-start generator plus keyword texts that reveal
// each entity's cluster; cold items get title text only.
int run_synth(const SynthArgs& a) {
  recmind::synthetic::ColdStartOptions opts;
  opts.seed = a.seed;
  const auto ds = recmind::synthetic::cold_start(opts);
  fs::create_directories(a.out);
  {
    std::ofstream out(fs::path(a.out) / "interactions.tsv");
    for (const auto& r : ds.interactions) {
      out << r.user_id << '\t' << r.item_id << '\t' << r.timestamp << '\n';
    }
  }
  std::mt19937_64 rng(a.seed);
  auto words = [&](int cluster, int count) {
    std::string s;
    std::uniform_int_distribution<int> pick(0, 11);
    for (int k = 0; k < count; ++k) {
      if (k) s += ' ';
      s += "topic" + std::to_string(cluster) + "w" + std::to_string(pick(rng));
    }
    return s;
  };
  std::vector<recmind::EntityText> texts;
  const auto& split = ds.split;
  for (recmind::Index u = 0; u < split.num_users(); ++u) {
    const int c = ds.user_cluster[static_cast<std::size_t>(u)];
    texts.push_back({split.user_vocab.ids[static_cast<std::size_t>(u)], recmind::EntityKind::kUser,
                     {{"reviews", "Great product!! " + words(c, 6)}}});
  }
  for (recmind::Index i = 0; i < split.num_items(); ++i) {
    const int c = ds.item_cluster[static_cast<std::size_t>(i)];
    recmind::EntityText e{split.item_vocab.ids[static_cast<std::size_t>(i)],
                          recmind::EntityKind::kItem,
                          {{"title", "The " + words(c, 3)}}};
    if (!split.cold_items.contains(i)) e.fields.emplace_back("description", words(c, 8));
    texts.push_back(std::move(e));
  }
  std::ofstream out(fs::path(a.out) / "texts.jsonl");
  recmind::write_texts(out, texts);
  std::cout << "wrote " << ds.interactions.size() << " interactions and " << texts.size()
            << " texts -> " << a.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RecMind: gated graph/language recommender training and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  PrepareArgs prepare;
  auto* p = app.add_subcommand("prepare", "core-filter, normalize and split raw interactions");
  p->add_option("--interactions", prepare.interactions, "TSV or JSONL interactions")->required();
  p->add_option("--format", prepare.format, "tsv or jsonl (default: from extension)")
      ->check(CLI::IsMember({"tsv", "jsonl"}));
  p->add_option("--texts", prepare.texts, "entity texts JSONL to normalize");
  p->add_option("--k", prepare.k, "core filter threshold")->capture_default_str();
  p->add_option("--cold-threshold", prepare.cold_threshold, "cold item degree threshold")
      ->capture_default_str();
  p->add_option("--boilerplate", prepare.boilerplate, "regex stripped from texts (repeatable)");
  p->add_option("--out", prepare.out, "output split directory")->required();

  EmbedArgs embed;
  auto* e = app.add_subcommand("embed-fallback", "write a hashed-fallback RMEB embedding file");
  e->add_option("--split", embed.split, "split directory")->required();
  e->add_option("--texts", embed.texts, "entity texts JSONL");
  e->add_option("--features", embed.features, "structured features JSONL for rows without text");
  e->add_option("--dim-in", embed.dim_in, "raw embedding width")->capture_default_str();
  e->add_option("--seed", embed.seed, "hash seed")->capture_default_str();
  e->add_option("--out", embed.out, "output RMEB path")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train with warm-up and early stopping");
  t->add_option("--split", train.split, "split directory")->required();
  t->add_option("--embeddings", train.embeddings, "RMEB language embeddings")->required();
  t->add_option("--config", train.config, "JSON config (applied over flags)");
  t->add_option("--out", train.out, "output run directory")->required();
  t->add_option("--resume", train.resume, "continue from a last.ckpt");
  for (const char* key :
       {"dim", "layers", "lr", "tau", "lambda", "beta", "n_negatives", "neg_sampling",
        "popularity_exponent", "batch_users", "warmup_epochs", "max_epochs", "patience",
        "queue_size", "queue_momentum", "edge_dropout_rate", "embedding_dropout_rate", "seed",
        "optimizer", "precision", "validation_negatives"}) {
    std::string flag = std::string("--") + key;
    for (auto& c : flag) c = c == '_' ? '-' : c;
    t->add_option(flag, train.overrides[key], std::string("TrainConfig.") + key);
  }
  t->add_flag("--llm-only", train.llm_only, "score with language embeddings only");
  t->add_flag("--no-align-users", train.no_align_users, "drop the user alignment term");
  t->add_flag("--no-align-items", train.no_align_items, "drop the item alignment term");
  t->add_flag("--graph-only", train.graph_only, "pin gates and alpha to 1");

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "sampled or full ranking evaluation");
  v->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  v->add_option("--split", ev.split, "split directory")->required();
  v->add_option("--embeddings", ev.embeddings, "RMEB language embeddings")->required();
  v->add_option("--which", ev.which, "test or validation")
      ->check(CLI::IsMember({"test", "validation"}))
      ->capture_default_str();
  v->add_option("--k", ev.k, "comma-separated cutoffs")->capture_default_str();
  v->add_option("--negatives", ev.negatives, "sampled negatives per user")->capture_default_str();
  v->add_flag("--full-ranking", ev.full_ranking, "rank against every non-positive item");
  v->add_option("--strata", ev.strata, "comma-separated degree thresholds")->capture_default_str();
  v->add_option("--seed", ev.seed, "negative sampling seed")->capture_default_str();
  v->add_option("--baseline", ev.baseline, "baseline report.json for relative improvement");
  v->add_option("--name", ev.name, "model name in the table")->capture_default_str();
  v->add_option("--out", ev.out, "output directory")->required();

  std::string inspect_target;
  auto* in = app.add_subcommand("inspect", "print a run manifest");
  in->add_option("path", inspect_target, "run directory or manifest file")->required();

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "write a synthetic clustered dataset");
  s->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
  s->add_option("--out", synth.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*p) return run_prepare(prepare);
    if (*e) return run_embed_fallback(embed);
    if (*t) return run_train(train);
    if (*v) return run_eval(ev);
    if (*in) return run_inspect(inspect_target);
    if (*s) return run_synth(synth);
  } catch (const recmind::IoError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const CLI::Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 1;
}
