// Copyright 2026 The lrqt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace lrqt {

using Index = Eigen::Index;
using Complex = std::complex<double>;

template <typename Scalar>
using Block = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RealBlock = Block<double>;
using ComplexBlock = Block<Complex>;
using RealVector = Vector<double>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

template <typename T>
inline constexpr bool is_complex_v = false;
template <typename T>
inline constexpr bool is_complex_v<std::complex<T>> = true;

template <typename Scalar>
concept BlockScalar = std::is_same_v<Scalar, double> || std::is_same_v<Scalar, Complex>;

// ---------------------------------------------------------------------------
// error hierarchy
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
  public:
    using Error::Error;
};

class DimensionMismatch : public Error {
  public:
    DimensionMismatch(const std::string &where, Index expected, Index got)
        : Error(where + ": dimension mismatch (expected " + std::to_string(expected) + ", got " +
                std::to_string(got) + ")"),
          expected_(expected),
          got_(got) {}

    Index expected() const { return expected_; }
    Index got() const { return got_; }

  private:
    Index expected_;
    Index got_;
};

class RankDeficiency : public Error {
  public:
    RankDeficiency(const std::string &msg, Index deficient_columns)
        : Error(msg), deficient_columns_(deficient_columns) {}

    /// Number of columns beyond the numerical rank.
    Index deficient_columns() const { return deficient_columns_; }

  private:
    Index deficient_columns_;
};

class NotPositiveDefinite : public Error {
  public:
    using Error::Error;
};

class ConvergenceFailure : public Error {
  public:
    ConvergenceFailure(const std::string &msg, double residual) : Error(msg), residual_(residual) {}
    double residual() const { return residual_; }

  private:
    double residual_;
};

class IllConditioned : public Error {
  public:
    IllConditioned(const std::string &msg, double condition) : Error(msg), condition_(condition) {}
    double condition() const { return condition_; }

  private:
    double condition_;
};

class CapacityExceeded : public Error {
  public:
    using Error::Error;
};

}  // namespace lrqt
