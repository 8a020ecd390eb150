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

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace recmind {

// Row-major so that one row is one entity's vector and rows can be handed
// out as contiguous spans.
template <typename Scalar>
using Matrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using MatrixXf = Matrix<float>;

// Node index in the joint user/item space: users occupy [0, num_users),
// items occupy [num_users, num_users + num_items).
using Index = std::int64_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for unreadable files and malformed inputs. The CLI maps it to
// exit code 2.
class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public IoError {
 public:
  ParseError(const std::string& source, std::size_t line,
             const std::string& what)
      : IoError(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

template <typename Scalar>
inline Scalar sigmoid(Scalar x) {
  if (x >= 0) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
  }
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

// log(1 + exp(x)) without overflow.
template <typename Scalar>
inline Scalar softplus(Scalar x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace recmind
