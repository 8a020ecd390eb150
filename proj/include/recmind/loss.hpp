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

#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "recmind/queue.hpp"
#include "recmind/types.hpp"

namespace recmind {

template <typename Scalar>
struct BprResult {
  Scalar loss = 0;
  Vector<Scalar> d_pos;  // batch
  Matrix<Scalar> d_neg;  // batch x n
};

// Mean over all (row, negative) pairs of -log sigmoid(s_pos - s_neg).
template <typename Scalar>
BprResult<Scalar> bpr_loss_with_grad(const Vector<Scalar>& scores_pos,
                                     const Matrix<Scalar>& scores_neg) {
  if (scores_neg.rows() != scores_pos.size()) {
    throw Error("bpr_loss: positive/negative row mismatch");
  }
  BprResult<Scalar> r;
  r.d_pos = Vector<Scalar>::Zero(scores_pos.size());
  r.d_neg = Matrix<Scalar>::Zero(scores_neg.rows(), scores_neg.cols());
  const Index pairs = scores_neg.size();
  if (pairs == 0) return r;
  const Scalar inv = Scalar(1) / static_cast<Scalar>(pairs);
  for (Index b = 0; b < scores_neg.rows(); ++b) {
    for (Index k = 0; k < scores_neg.cols(); ++k) {
      const Scalar margin = scores_pos[b] - scores_neg(b, k);
      r.loss += softplus(-margin);
      // d/dmargin of softplus(-margin) = -sigmoid(-margin)
      const Scalar g = -sigmoid(-margin) * inv;
      r.d_pos[b] += g;
      r.d_neg(b, k) -= g;
    }
  }
  r.loss *= inv;
  return r;
}

template <typename Scalar>
Scalar bpr_loss(const Vector<Scalar>& scores_pos,
                const Matrix<Scalar>& scores_neg) {
  return bpr_loss_with_grad(scores_pos, scores_neg).loss;
}

template <typename Scalar>
struct InfoNceResult {
  Scalar loss = 0;
  Matrix<Scalar> d_zg;
  Matrix<Scalar> d_zl;
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> unit_rows(const Matrix<Scalar>& x, Vector<Scalar>& norms,
                         const char* name) {
  norms = x.rowwise().norm();
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    if (!(norms[r] > 0)) {
      throw Error(std::string("infonce: zero-norm ") + name + " row " +
                  std::to_string(r));
    }
    out.row(r) = x.row(r) / norms[r];
  }
  return out;
}

// Gradient through x -> x / |x|.
template <typename Scalar>
Matrix<Scalar> unit_rows_backward(const Matrix<Scalar>& unit,
                                  const Vector<Scalar>& norms,
                                  const Matrix<Scalar>& d_unit) {
  Matrix<Scalar> out(unit.rows(), unit.cols());
  for (Index r = 0; r < unit.rows(); ++r) {
    const Scalar proj = unit.row(r).dot(d_unit.row(r));
    out.row(r) = (d_unit.row(r) - proj * unit.row(r)) / norms[r];
  }
  return out;
}

// One direction of the symmetric loss: anchors against candidates (the
// other view, same rows) plus optional queue keys. Returns the mean loss
// and accumulates scaled gradients into d_anchor / d_cand.
template <typename Scalar>
Scalar infonce_direction(const Matrix<Scalar>& anchor,
                         const Matrix<Scalar>& cand,
                         const Matrix<Scalar>& keys,
                         const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& key_ok,
                         Scalar tau, Scalar weight, Matrix<Scalar>& d_anchor,
                         Matrix<Scalar>& d_cand) {
  const Index b = anchor.rows();
  const Index q = keys.rows();
  const Matrix<Scalar> logits = anchor * cand.transpose() / tau;
  Matrix<Scalar> qlogits;
  if (q > 0) qlogits = anchor * keys.transpose() / tau;
  Scalar total = 0;
  Matrix<Scalar> d_logits(b, b);
  Matrix<Scalar> d_qlogits = Matrix<Scalar>::Zero(b, q);
  const Scalar scale = weight / static_cast<Scalar>(b);
  for (Index i = 0; i < b; ++i) {
    Scalar mx = logits.row(i).maxCoeff();
    for (Index k = 0; k < q; ++k) {
      if (key_ok(i, k)) mx = std::max(mx, qlogits(i, k));
    }
    Scalar z = 0;
    for (Index j = 0; j < b; ++j) z += std::exp(logits(i, j) - mx);
    for (Index k = 0; k < q; ++k) {
      if (key_ok(i, k)) z += std::exp(qlogits(i, k) - mx);
    }
    const Scalar lse = mx + std::log(z);
    total += lse - logits(i, i);
    for (Index j = 0; j < b; ++j) {
      d_logits(i, j) = std::exp(logits(i, j) - lse) * scale;
    }
    d_logits(i, i) -= scale;
    for (Index k = 0; k < q; ++k) {
      if (key_ok(i, k)) d_qlogits(i, k) = std::exp(qlogits(i, k) - lse) * scale;
    }
  }
  d_anchor += d_logits * cand / tau;
  d_cand += d_logits.transpose() * anchor / tau;
  if (q > 0) d_anchor += d_qlogits * keys / tau;
  return total / static_cast<Scalar>(b);
}

}  // namespace detail

// Symmetric temperature-scaled InfoNCE over cosine similarity. Row r of zg
// and row r of zl are a positive pair; every other row of the opposite view
// is an in-batch negative (the denominator includes the positive). Queue
// keys, when given, join both directions' denominators except keys that
// belong to the anchor's own entity. The result averages the two
// directions.
template <typename Scalar>
InfoNceResult<Scalar> infonce_align_with_grad(
    const Matrix<Scalar>& zg, const Matrix<Scalar>& zl, Scalar tau,
    const MomentumQueue<Scalar>* queue = nullptr,
    std::span<const Index> batch_entities = {}) {
  if (!(tau > 0)) throw Error("infonce: temperature must be positive");
  if (zg.rows() != zl.rows() || zg.cols() != zl.cols()) {
    throw Error("infonce: view shapes differ");
  }
  InfoNceResult<Scalar> r;
  r.d_zg = Matrix<Scalar>::Zero(zg.rows(), zg.cols());
  r.d_zl = Matrix<Scalar>::Zero(zl.rows(), zl.cols());
  const Index b = zg.rows();
  if (b == 0) return r;

  Vector<Scalar> ng, nl;
  const Matrix<Scalar> ug = detail::unit_rows(zg, ng, "graph");
  const Matrix<Scalar> ul = detail::unit_rows(zl, nl, "language");

  Matrix<Scalar> keys;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> key_ok;
  if (queue != nullptr && !queue->empty()) {
    const auto& entries = queue->entries();
    std::vector<std::size_t> usable;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (entries[k].key.norm() > 0) usable.push_back(k);
    }
    keys.resize(static_cast<Index>(usable.size()), zg.cols());
    key_ok.resize(b, static_cast<Index>(usable.size()));
    for (std::size_t k = 0; k < usable.size(); ++k) {
      const auto& e = entries[usable[k]];
      keys.row(static_cast<Index>(k)) = e.key.transpose() / e.key.norm();
      for (Index i = 0; i < b; ++i) {
        const bool own = static_cast<std::size_t>(i) < batch_entities.size() &&
                         batch_entities[static_cast<std::size_t>(i)] == e.entity;
        key_ok(i, static_cast<Index>(k)) = !own;
      }
    }
  } else {
    keys.resize(0, zg.cols());
    key_ok.resize(b, 0);
  }

  Matrix<Scalar> d_ug = Matrix<Scalar>::Zero(b, zg.cols());
  Matrix<Scalar> d_ul = Matrix<Scalar>::Zero(b, zg.cols());
  const Scalar half = Scalar(0.5);
  r.loss += half * detail::infonce_direction(ug, ul, keys, key_ok, tau, half,
                                             d_ug, d_ul);
  r.loss += half * detail::infonce_direction(ul, ug, keys, key_ok, tau, half,
                                             d_ul, d_ug);
  r.d_zg = detail::unit_rows_backward(ug, ng, d_ug);
  r.d_zl = detail::unit_rows_backward(ul, nl, d_ul);
  return r;
}

template <typename Scalar>
Scalar infonce_align(const Matrix<Scalar>& zg, const Matrix<Scalar>& zl,
                     Scalar tau, const MomentumQueue<Scalar>* queue = nullptr,
                     std::span<const Index> batch_entities = {}) {
  return infonce_align_with_grad(zg, zl, tau, queue, batch_entities).loss;
}

}  // namespace recmind
