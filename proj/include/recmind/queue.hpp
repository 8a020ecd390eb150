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

#include <deque>
#include <unordered_map>
#include <vector>

#include "recmind/types.hpp"

namespace recmind {

// FIFO of momentum-averaged language keys used as extra contrastive
// negatives. Each entity keeps a running key k <- m*k + (1-m)*z_L; every
// update pushes the refreshed key and evicts the oldest entry beyond
// capacity. Keys are constants with respect to backprop.
template <typename Scalar>
class MomentumQueue {
 public:
  struct Entry {
    Index entity;
    Vector<Scalar> key;
  };

  MomentumQueue() = default;
  MomentumQueue(std::size_t capacity, Scalar momentum)
      : capacity_(capacity), momentum_(momentum) {
    if (!(momentum >= 0 && momentum < 1)) {
      throw Error("queue momentum must lie in [0, 1)");
    }
  }

  std::size_t capacity() const { return capacity_; }
  Scalar momentum() const { return momentum_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::deque<Entry>& entries() const { return entries_; }

  // Rows of new_keys are the current z_L of `entities`.
  void update(const std::vector<Index>& entities,
              const Matrix<Scalar>& new_keys) {
    if (static_cast<Index>(entities.size()) != new_keys.rows()) {
      throw Error("queue update: entity/key count mismatch");
    }
    if (!entries_.empty() && new_keys.cols() != entries_.front().key.size()) {
      throw Error("queue update: key dimension mismatch");
    }
    if (capacity_ == 0) return;
    for (std::size_t r = 0; r < entities.size(); ++r) {
      const Vector<Scalar> current = new_keys.row(static_cast<Index>(r)).transpose();
      auto [it, inserted] = state_.try_emplace(entities[r], current);
      if (!inserted) {
        it->second = momentum_ * it->second + (Scalar(1) - momentum_) * current;
      }
      entries_.push_back({entities[r], it->second});
      if (entries_.size() > capacity_) entries_.pop_front();
    }
  }

  Matrix<Scalar> keys() const {
    if (entries_.empty()) return {};
    Matrix<Scalar> out(static_cast<Index>(entries_.size()),
                       entries_.front().key.size());
    for (std::size_t r = 0; r < entries_.size(); ++r) {
      out.row(static_cast<Index>(r)) = entries_[r].key.transpose();
    }
    return out;
  }

 private:
  std::size_t capacity_ = 0;
  Scalar momentum_ = 0;
  std::deque<Entry> entries_;
  std::unordered_map<Index, Vector<Scalar>> state_;
};

}  // namespace recmind
