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

#include <cstdint>
#include <random>
#include <string>

#include "lrqt/types.hpp"

namespace lrqt {

/// What a random block is used for inside one realization. Distinct roles
/// map to distinct streams, so S and G are never drawn from the same stream.
enum class StreamRole : std::uint64_t {
    probe = 0,        // plain typicality vectors z_i
    range_sketch = 1, // S, the block pushed through e^{-beta H}
    complement = 2,   // G, projected onto the complement of span(Q)
};

inline constexpr std::uint64_t kStreamRoles = 4;

inline std::uint64_t stream_id(std::uint64_t realization, StreamRole role) {
    return realization * kStreamRoles + static_cast<std::uint64_t>(role);
}

struct RandomBlock {
    RealBlock vectors;
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
};

/// I.i.d. standard normal entries, filled column-major from a Mersenne
/// Twister seeded by (seed, stream_id). Same inputs give bit-identical blocks.
inline RandomBlock sample_gaussian_block(Index dim, Index r, std::uint64_t seed, std::uint64_t stream) {
    if (dim < 1 || r < 1) throw InvalidArgument("sample_gaussian_block: dim and r must be >= 1");
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::mt19937_64 engine(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    RandomBlock out{RealBlock(dim, r), seed, stream};
    double *data = out.vectors.data();
    for (Index k = 0; k < dim * r; ++k) data[k] = normal(engine);
    return out;
}

/// Orthonormal Q and upper-triangular R (positive diagonal) with Y = Q R.
///
/// `log_scale` is the factor inherited from the block that was orthogonalized:
/// the represented R equals e^{log_scale} * r_factor while Q carries no scale.
struct RangeBasis {
    RealBlock q_block;
    RealBlock r_factor;
    double source_beta = 0.0;
    double log_scale = 0.0;

    Index rank() const { return q_block.cols(); }
    Index dim() const { return q_block.rows(); }
};

inline constexpr double kDefaultRankTol = 1e-12;

/// Tolerance used inside the low-rank estimators. Deep in the ordered phase
/// e^{-beta H} S legitimately has singular-value ratios near 1e-13 (L=14,
/// beta=10, r=100); Householder Q stays orthonormal there and the estimator
/// stays unbiased, so only roundoff-level dependence is rejected.
inline constexpr double kEstimatorRankTol = 1e-14;

namespace detail {

inline void enforce_positive_diagonal(RealBlock &q, RealBlock &r) {
    for (Index i = 0; i < r.rows(); ++i) {
        if (r(i, i) < 0.0) {
            r.row(i) *= -1.0;
            q.col(i) *= -1.0;
        }
    }
}

/// Number of singular values of the triangular factor below tol * largest.
inline Index deficient_columns(const RealBlock &r_factor, double rank_tol) {
    if (r_factor.size() == 0) return 0;
    const RealVector sv = Eigen::JacobiSVD<RealBlock>(r_factor).singularValues();
    if (sv[0] == 0.0) return r_factor.cols();
    Index bad = 0;
    for (Index i = 0; i < sv.size(); ++i) {
        if (!(sv[i] > rank_tol * sv[0])) ++bad;
    }
    return bad;
}

}  // namespace detail

/// Householder QR with the positive-diagonal convention. A rank_tol of zero
/// skips the rank check.
inline RangeBasis orthogonalize_qr(const RealBlock &y, double rank_tol = kDefaultRankTol) {
    const Index n = y.rows();
    const Index r = y.cols();
    if (r < 1 || r > n) {
        throw InvalidArgument("orthogonalize_qr: need 1 <= columns <= rows (got " + std::to_string(r) +
                              " columns, " + std::to_string(n) + " rows)");
    }
    Eigen::HouseholderQR<RealBlock> qr(y);
    RangeBasis out;
    out.q_block = qr.householderQ() * RealBlock::Identity(n, r);
    out.r_factor = qr.matrixQR().topRows(r).template triangularView<Eigen::Upper>();
    detail::enforce_positive_diagonal(out.q_block, out.r_factor);
    if (rank_tol > 0.0) {
        const Index bad = detail::deficient_columns(out.r_factor, rank_tol);
        if (bad > 0) {
            throw RankDeficiency("orthogonalize_qr: block is numerically rank deficient (" +
                                     std::to_string(bad) + " of " + std::to_string(r) +
                                     " columns below relative tolerance " + std::to_string(rank_tol) + ")",
                                 bad);
        }
    }
    return out;
}

/// R from the Cholesky factor of the overlap Y^T Y, then Q = Y R^{-1} by a
/// triangular solve. Fails when the columns are (numerically) dependent.
inline RangeBasis orthogonalize_cholesky(const RealBlock &y, double rank_tol = kDefaultRankTol) {
    const Index r = y.cols();
    if (r < 1 || r > y.rows()) throw InvalidArgument("orthogonalize_cholesky: need 1 <= columns <= rows");
    const RealBlock overlap = y.transpose() * y;
    Eigen::LLT<RealBlock> llt(overlap);
    const char *advice = "; fall back to orthogonalize_qr";
    if (llt.info() != Eigen::Success) {
        throw NotPositiveDefinite(std::string("orthogonalize_cholesky: overlap matrix is not positive definite") +
                                  advice);
    }
    RangeBasis out;
    out.r_factor = llt.matrixU();
    // pivots at roundoff level mean the overlap is singular in floating point
    const RealVector d = out.r_factor.diagonal();
    if (d.minCoeff() <= std::sqrt(rank_tol) * d.maxCoeff()) {
        throw NotPositiveDefinite(std::string("orthogonalize_cholesky: overlap matrix is numerically singular "
                                              "(linearly dependent columns)") +
                                  advice);
    }
    out.q_block = out.r_factor.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(y);
    return out;
}

/// G - Q Q^T G, with one reorthogonalization pass. A basis spanning the
/// whole space leaves an exactly zero complement.
inline RealBlock project_complement(const RangeBasis &basis, const RealBlock &g) {
    if (g.rows() != basis.dim()) throw DimensionMismatch("project_complement", basis.dim(), g.rows());
    if (basis.rank() == basis.dim()) return RealBlock::Zero(g.rows(), g.cols());
    const RealBlock &q = basis.q_block;
    RealBlock out = g - q * (q.transpose() * g);
    out -= q * (q.transpose() * out);
    return out;
}

inline RealBlock project_complement(const RangeBasis &basis, const RandomBlock &g) {
    return project_complement(basis, g.vectors);
}

}  // namespace lrqt
