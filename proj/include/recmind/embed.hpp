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

// Language-side embeddings: the RMEB exchange file, the hashed fallback
// encoder for entities without exporter output, a fixed random MLP over
// structured features, and the trainable projection into model space.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "recmind/dataset.hpp"
#include "recmind/hash.hpp"
#include "recmind/types.hpp"

namespace recmind {

enum class EmbeddingSource { kFile, kHashedFallback, kStructuredMlp };

inline std::string to_string(EmbeddingSource s) {
  switch (s) {
    case EmbeddingSource::kFile: return "file";
    case EmbeddingSource::kHashedFallback: return "hashed_fallback";
    case EmbeddingSource::kStructuredMlp: return "structured_mlp";
  }
  return "unknown";
}

// Raw (pre-projection) language vectors, one row per joint node index.
struct LanguageEmbeddingStore {
  Index dim_in = 0;
  MatrixXf vectors;
  std::vector<bool> has_text;
  EmbeddingSource source = EmbeddingSource::kFile;

  Index num_entities() const { return vectors.rows(); }
};

inline void check_finite(const LanguageEmbeddingStore& store) {
  for (Index r = 0; r < store.vectors.rows(); ++r) {
    if (!store.vectors.row(r).allFinite()) {
      throw Error("entity " + std::to_string(r) + " non-finite");
    }
  }
}

// ---------------------------------------------------------------------------
// RMEB v1, little-endian:
//   "RMEB" | u32 version=1 | u64 entity_count | u32 dim_in |
//   presence bitmap (entity_count bits, LSB first, padded to a byte) |
//   entity_count * dim_in f32, row-major in node order.

inline constexpr char kRmebMagic[4] = {'R', 'M', 'E', 'B'};
inline constexpr std::uint32_t kRmebVersion = 1;

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xff));
    u = static_cast<U>(u >> 8);
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    u = static_cast<U>(u | (static_cast<U>(p[i]) << (8 * i)));
  }
  return static_cast<T>(u);
}

inline std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_all(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path);
}

}  // namespace detail

inline std::string encode_rmeb(const LanguageEmbeddingStore& store) {
  const auto n = static_cast<std::uint64_t>(store.vectors.rows());
  const auto dim = static_cast<std::uint32_t>(store.vectors.cols());
  std::string out(kRmebMagic, 4);
  detail::put_le<std::uint32_t>(out, kRmebVersion);
  detail::put_le<std::uint64_t>(out, n);
  detail::put_le<std::uint32_t>(out, dim);
  std::string bitmap((n + 7) / 8, '\0');
  for (std::uint64_t i = 0; i < n; ++i) {
    if (i < store.has_text.size() && store.has_text[i]) {
      bitmap[i / 8] = static_cast<char>(bitmap[i / 8] | (1 << (i % 8)));
    }
  }
  out += bitmap;
  out.reserve(out.size() + n * dim * 4);
  for (Index r = 0; r < store.vectors.rows(); ++r) {
    for (Index c = 0; c < store.vectors.cols(); ++c) {
      detail::put_le<std::uint32_t>(
          out, std::bit_cast<std::uint32_t>(store.vectors(r, c)));
    }
  }
  return out;
}

inline void write_embedding_file(const std::string& path,
                                 const LanguageEmbeddingStore& store) {
  detail::write_all(path, encode_rmeb(store));
}

inline LanguageEmbeddingStore decode_rmeb(const std::string& bytes,
                                          Index expected_entities) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  constexpr std::size_t kHeader = 4 + 4 + 8 + 4;
  if (bytes.size() < kHeader) throw IoError("RMEB: truncated header");
  if (std::memcmp(p, kRmebMagic, 4) != 0) throw IoError("RMEB: bad magic");
  const auto version = detail::get_le<std::uint32_t>(p + 4);
  if (version != kRmebVersion) {
    throw IoError("RMEB: unsupported version " + std::to_string(version));
  }
  const auto n = detail::get_le<std::uint64_t>(p + 8);
  const auto dim = detail::get_le<std::uint32_t>(p + 16);
  if (expected_entities >= 0 &&
      n != static_cast<std::uint64_t>(expected_entities)) {
    throw IoError("RMEB: file has " + std::to_string(n) +
                  " entities, expected " + std::to_string(expected_entities));
  }
  const std::size_t bitmap_bytes = (n + 7) / 8;
  const std::size_t need = kHeader + bitmap_bytes + n * dim * 4;
  if (bytes.size() < need) {
    throw IoError("RMEB: truncated payload (" + std::to_string(bytes.size()) +
                  " bytes, need " + std::to_string(need) + ")");
  }
  if (bytes.size() > need) throw IoError("RMEB: trailing bytes after payload");

  LanguageEmbeddingStore store;
  store.dim_in = dim;
  store.source = EmbeddingSource::kFile;
  store.has_text.resize(n);
  const auto* bitmap = p + kHeader;
  for (std::uint64_t i = 0; i < n; ++i) {
    store.has_text[i] = (bitmap[i / 8] >> (i % 8)) & 1;
  }
  store.vectors.resize(static_cast<Index>(n), dim);
  const auto* data = bitmap + bitmap_bytes;
  for (std::uint64_t r = 0; r < n; ++r) {
    for (std::uint32_t c = 0; c < dim; ++c) {
      store.vectors(static_cast<Index>(r), c) = std::bit_cast<float>(
          detail::get_le<std::uint32_t>(data + 4 * (r * dim + c)));
    }
  }
  check_finite(store);
  return store;
}

// Pass expected_entities < 0 to accept any row count.
inline LanguageEmbeddingStore load_embedding_file(const std::string& path,
                                                  Index expected_entities) {
  try {
    return decode_rmeb(detail::read_all(path), expected_entities);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Fallback encoders

// Signed feature hashing over whitespace tokens, salted by field name,
// scaled to unit L2 norm. Expects normalized text.
inline Eigen::VectorXf hashed_fallback_encode(const EntityText& entity,
                                              Index dim_in,
                                              std::uint64_t seed) {
  if (dim_in < 1) throw Error("hashed_fallback_encode: dim_in must be >= 1");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim_in);
  for (const auto& [field, text] : entity.fields) {
    for (const auto& tok : detail::whitespace_tokens(text)) {
      const std::uint64_t h = stable_hash64(field + '\x1f' + tok, seed);
      const auto idx = static_cast<Index>(h % static_cast<std::uint64_t>(dim_in));
      acc[idx] += (h >> 63) ? -1.0 : 1.0;
    }
  }
  const double norm = acc.norm();
  if (norm > 0) acc /= norm;
  return acc.cast<float>();
}

// Untrained one-hidden-layer network, tanh(W1 x + b1) followed by a linear
// map to dim_in. Weights are drawn once from the seed.
class StructuredMlpEncoder {
 public:
  StructuredMlpEncoder(Index num_features, Index hidden, Index dim_in,
                       std::uint64_t seed)
      : w1_(hidden, num_features), b1_(hidden), w2_(dim_in, hidden) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n1(0.0, 1.0 / std::sqrt(std::max<Index>(num_features, 1)));
    std::normal_distribution<double> n2(0.0, 1.0 / std::sqrt(std::max<Index>(hidden, 1)));
    for (Index i = 0; i < w1_.size(); ++i) w1_.data()[i] = n1(rng);
    b1_.setZero();
    for (Index i = 0; i < w2_.size(); ++i) w2_.data()[i] = n2(rng);
  }

  Index num_features() const { return w1_.cols(); }
  Index dim_in() const { return w2_.rows(); }

  Eigen::VectorXf encode(const Eigen::VectorXd& features) const {
    if (features.size() != w1_.cols()) {
      throw Error("structured features: expected " +
                  std::to_string(w1_.cols()) + " values, got " +
                  std::to_string(features.size()));
    }
    const Eigen::VectorXd hidden = (w1_ * features + b1_).array().tanh();
    return (w2_ * hidden).cast<float>();
  }

 private:
  Eigen::MatrixXd w1_;
  Eigen::VectorXd b1_;
  Eigen::MatrixXd w2_;
};

// ---------------------------------------------------------------------------
// Projection into model space: z_L = raw * weight^T.

template <typename Scalar>
struct Projection {
  Matrix<Scalar> weight;  // d x dim_in
  bool trainable = true;
};

template <typename Scalar>
Matrix<Scalar> project(const LanguageEmbeddingStore& store,
                       const Projection<Scalar>& proj) {
  if (proj.weight.cols() != store.vectors.cols()) {
    throw Error("project: weight has " + std::to_string(proj.weight.cols()) +
                " columns, store dim_in is " +
                std::to_string(store.vectors.cols()));
  }
  return store.vectors.cast<Scalar>() * proj.weight.transpose();
}

}  // namespace recmind
