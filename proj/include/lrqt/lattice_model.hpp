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

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "lrqt/types.hpp"

namespace lrqt {

/// Spin configurations of a periodic spin-1/2 chain with a fixed number of
/// up spins. Bit i of a configuration is set when spin i points up; states
/// are stored in ascending integer order.
class SectorBasis {
  public:
    SectorBasis(int chain_length, int n_up, std::vector<std::uint64_t> states)
        : chain_length_(chain_length), n_up_(n_up), states_(std::move(states)) {}

    int chain_length() const { return chain_length_; }
    int n_up() const { return n_up_; }
    Index dim() const { return static_cast<Index>(states_.size()); }
    const std::vector<std::uint64_t> &states() const { return states_; }
    std::uint64_t state(Index i) const { return states_[static_cast<std::size_t>(i)]; }

    /// Ordinal of `config` in the basis, or nullopt when it lies outside the sector.
    std::optional<Index> index_of(std::uint64_t config) const {
        auto it = std::lower_bound(states_.begin(), states_.end(), config);
        if (it == states_.end() || *it != config) return std::nullopt;
        return static_cast<Index>(it - states_.begin());
    }

  private:
    int chain_length_;
    int n_up_;
    std::vector<std::uint64_t> states_;
};

inline SectorBasis build_sector_basis(int chain_length, double total_sz) {
    if (chain_length < 3) {
        throw InvalidArgument("build_sector_basis: chain length must be >= 3 (got " +
                              std::to_string(chain_length) + ")");
    }
    if (chain_length > 62) {
        throw InvalidArgument("build_sector_basis: chain length above 62 is not representable");
    }
    const double twice_up = chain_length + 2.0 * total_sz;
    const double rounded = std::round(twice_up);
    if (!std::isfinite(total_sz) || std::abs(twice_up - rounded) > 1e-9 ||
        static_cast<long long>(rounded) % 2 != 0 || std::abs(total_sz) > 0.5 * chain_length) {
        throw InvalidArgument("build_sector_basis: invalid magnetization total_sz=" +
                              std::to_string(total_sz) + " for L=" + std::to_string(chain_length) +
                              " (need |total_sz| <= L/2 and L/2 + total_sz integral)");
    }
    const int n_up = static_cast<int>(rounded) / 2;

    std::vector<std::uint64_t> states;
    const std::uint64_t limit = std::uint64_t{1} << chain_length;
    if (n_up == 0) {
        states.push_back(0);
    } else {
        // Gosper's hack: next integer with the same popcount.
        std::uint64_t s = (std::uint64_t{1} << n_up) - 1;
        while (s < limit) {
            states.push_back(s);
            const std::uint64_t c = s & (~s + 1);
            const std::uint64_t r = s + c;
            s = (((r ^ s) >> 2) / c) | r;
        }
    }
    return SectorBasis(chain_length, n_up, std::move(states));
}

/// Real symmetric operator on a sector, stored sparse or dense.
class OperatorMatrix {
  public:
    static OperatorMatrix from_sparse(SparseMatrix m) {
        if (m.rows() != m.cols()) throw DimensionMismatch("OperatorMatrix", m.rows(), m.cols());
        m.makeCompressed();
        const SparseMatrix diff = m - SparseMatrix(m.transpose());
        const double asym = diff.nonZeros() ? diff.coeffs().cwiseAbs().maxCoeff() : 0.0;
        if (asym > 1e-14) {
            throw InvalidArgument("OperatorMatrix: matrix is not symmetric (max asymmetry " +
                                  std::to_string(asym) + ")");
        }
        OperatorMatrix op;
        op.storage_ = std::move(m);
        return op;
    }

    static OperatorMatrix from_dense(RealBlock m) {
        if (m.rows() != m.cols()) throw DimensionMismatch("OperatorMatrix", m.rows(), m.cols());
        const double asym = m.size() ? (m - m.transpose()).cwiseAbs().maxCoeff() : 0.0;
        const double scale = std::max(1.0, m.size() ? m.cwiseAbs().maxCoeff() : 0.0);
        if (asym > 1e-14 * scale) {
            throw InvalidArgument("OperatorMatrix: matrix is not symmetric (max asymmetry " +
                                  std::to_string(asym) + ")");
        }
        // exact symmetrization removes roundoff-level asymmetry from rotated operators
        m = (0.5 * (m + m.transpose())).eval();
        OperatorMatrix op;
        op.storage_ = std::move(m);
        return op;
    }

    static OperatorMatrix identity(Index dim) {
        SparseMatrix m(dim, dim);
        m.setIdentity();
        return from_sparse(std::move(m));
    }

    static OperatorMatrix diagonal(const RealVector &d) {
        SparseMatrix m(d.size(), d.size());
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(static_cast<std::size_t>(d.size()));
        for (Index i = 0; i < d.size(); ++i) t.emplace_back(i, i, d[i]);
        m.setFromTriplets(t.begin(), t.end());
        return from_sparse(std::move(m));
    }

    Index dim() const {
        return std::visit([](const auto &m) -> Index { return m.rows(); }, storage_);
    }
    bool hermitian() const { return true; }
    bool is_sparse() const { return std::holds_alternative<SparseMatrix>(storage_); }
    const SparseMatrix &sparse() const { return std::get<SparseMatrix>(storage_); }
    const RealBlock &dense() const { return std::get<RealBlock>(storage_); }

    RealBlock to_dense() const {
        if (is_sparse()) return RealBlock(sparse());
        return dense();
    }

    double element(Index i, Index j) const {
        if (is_sparse()) return sparse().coeff(i, j);
        return dense()(i, j);
    }

    RealVector diagonal_entries() const {
        if (is_sparse()) return RealVector(sparse().diagonal());
        return dense().diagonal();
    }

    OperatorMatrix scaled(double c) const {
        if (is_sparse()) return from_sparse(SparseMatrix(c * sparse()));
        return from_dense(c * dense());
    }

    OperatorMatrix shifted(double c) const {
        if (is_sparse()) {
            SparseMatrix id(dim(), dim());
            id.setIdentity();
            return from_sparse(SparseMatrix(sparse() + c * id));
        }
        RealBlock m = dense();
        m.diagonal().array() += c;
        return from_dense(std::move(m));
    }

    /// Matrix-block product. Complex blocks are multiplied part by part so a
    /// block with zero imaginary part yields bit-identical real arithmetic.
    template <BlockScalar Scalar>
    Block<Scalar> apply(const Block<Scalar> &block) const {
        if (block.rows() != dim()) throw DimensionMismatch("apply_operator", dim(), block.rows());
        if constexpr (std::is_same_v<Scalar, double>) {
            return std::visit([&](const auto &m) -> RealBlock { return m * block; }, storage_);
        } else {
            const RealBlock re = block.real();
            const RealBlock im = block.imag();
            ComplexBlock out(block.rows(), block.cols());
            out.real() = apply<double>(re);
            out.imag() = apply<double>(im);
            return out;
        }
    }

  private:
    OperatorMatrix() = default;
    std::variant<SparseMatrix, RealBlock> storage_;
};

template <BlockScalar Scalar>
Block<Scalar> apply_operator(const OperatorMatrix &op, const Block<Scalar> &block) {
    return op.apply(block);
}

namespace detail {

/// Sum over periodic bonds of s^z_i s^z_{i+1} for a bit-encoded configuration.
inline double zz_bond_sum(std::uint64_t config, int chain_length) {
    double sum = 0.0;
    for (int i = 0; i < chain_length; ++i) {
        const int j = (i + 1) % chain_length;
        const bool a = (config >> i) & 1U;
        const bool b = (config >> j) & 1U;
        sum += (a == b) ? 0.25 : -0.25;
    }
    return sum;
}

}  // namespace detail

/// H = sum_i (1+delta) S^z_i S^z_{i+1} + S^x_i S^x_{i+1} + S^y_i S^y_{i+1},
/// periodic boundary conditions.
inline OperatorMatrix build_xxz_hamiltonian(const SectorBasis &basis, double delta) {
    const int L = basis.chain_length();
    const Index n = basis.dim();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(L / 2 + 1));
    for (Index k = 0; k < n; ++k) {
        const std::uint64_t s = basis.state(k);
        triplets.emplace_back(k, k, (1.0 + delta) * detail::zz_bond_sum(s, L));
        for (int i = 0; i < L; ++i) {
            const int j = (i + 1) % L;
            const std::uint64_t mask = (std::uint64_t{1} << i) | (std::uint64_t{1} << j);
            const std::uint64_t bits = s & mask;
            if (bits == 0 || bits == mask) continue;
            const auto target = basis.index_of(s ^ mask);
            // flip-flop preserves the number of up spins, so the target is always in the sector
            triplets.emplace_back(*target, k, 0.5);
        }
    }
    SparseMatrix m(n, n);
    m.setFromTriplets(triplets.begin(), triplets.end());
    return OperatorMatrix::from_sparse(std::move(m));
}

/// C = (1/L) sum_i S^z_i S^z_{i+1}; diagonal in the configuration basis.
inline OperatorMatrix build_nn_correlator(const SectorBasis &basis) {
    const int L = basis.chain_length();
    RealVector d(basis.dim());
    for (Index k = 0; k < basis.dim(); ++k) d[k] = detail::zz_bond_sum(basis.state(k), L) / L;
    return OperatorMatrix::diagonal(d);
}

}  // namespace lrqt
