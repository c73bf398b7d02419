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
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "lrqt/lattice_model.hpp"
#include "lrqt/propagator.hpp"
#include "lrqt/randrange.hpp"
#include "lrqt/types.hpp"

namespace lrqt {

/// HTQT: <z| O e^{-beta H} |z>. LTQT: <z| e^{-beta H/2} O e^{-beta H/2} |z>.
/// The LR_ variants split the trace into a low-rank part and a stochastic
/// part over the complement.
enum class EstimatorKind { HTQT, LTQT, LR_HTQT, LR_LTQT };

inline constexpr EstimatorKind kAllKinds[] = {EstimatorKind::HTQT, EstimatorKind::LTQT,
                                              EstimatorKind::LR_HTQT, EstimatorKind::LR_LTQT};

inline std::string_view to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::HTQT: return "HTQT";
        case EstimatorKind::LTQT: return "LTQT";
        case EstimatorKind::LR_HTQT: return "LR_HTQT";
        case EstimatorKind::LR_LTQT: return "LR_LTQT";
    }
    return "?";
}

inline std::optional<EstimatorKind> parse_kind(std::string_view s) {
    for (auto k : kAllKinds) {
        if (to_string(k) == s) return k;
    }
    if (s == "LR-HTQT") return EstimatorKind::LR_HTQT;
    if (s == "LR-LTQT") return EstimatorKind::LR_LTQT;
    return std::nullopt;
}

inline bool is_low_rank(EstimatorKind kind) {
    return kind == EstimatorKind::LR_HTQT || kind == EstimatorKind::LR_LTQT;
}

inline bool is_symmetric(EstimatorKind kind) {
    return kind == EstimatorKind::LTQT || kind == EstimatorKind::LR_LTQT;
}

/// A trace written as e^{log_scale} * (deterministic_term + stochastic_term).
/// Plain typicality estimates have no deterministic term.
struct TraceEstimate {
    double deterministic_term = 0.0;
    double stochastic_term = 0.0;
    double log_scale = 0.0;
    Index rank_r = 0;
    EstimatorKind kind = EstimatorKind::HTQT;

    double total() const { return deterministic_term + stochastic_term; }
    double value() const { return std::exp(log_scale) * total(); }
};

struct ExpectationEstimate {
    TraceEstimate numerator;
    TraceEstimate partition;
    double value = 0.0;
    double beta = 0.0;
    Index samples = 0;
};

inline ExpectationEstimate make_expectation(const TraceEstimate &numerator, const TraceEstimate &partition,
                                            double beta, Index samples) {
    ExpectationEstimate e{numerator, partition, 0.0, beta, samples};
    e.value = numerator.total() / partition.total();
    if (numerator.log_scale != partition.log_scale) {
        e.value *= std::exp(numerator.log_scale - partition.log_scale);
    }
    return e;
}

using BlockAction = std::function<RealBlock(const RealBlock &)>;

namespace detail {

/// sum_i a_i^T b_i. Complex blocks are reduced part by part (real part of
/// a^dagger b), so zero imaginary parts reproduce the real computation bit for bit.
inline double column_dot_sum(const RealBlock &a, const RealBlock &b) { return a.cwiseProduct(b).sum(); }

inline double column_dot_sum(const ComplexBlock &a, const ComplexBlock &b) {
    return column_dot_sum(RealBlock(a.real()), RealBlock(b.real())) +
           column_dot_sum(RealBlock(a.imag()), RealBlock(b.imag()));
}

/// Imaginary part of sum_i a_i^dagger b_i.
inline double column_dot_sum_imag(const ComplexBlock &a, const ComplexBlock &b) {
    return column_dot_sum(RealBlock(a.real()), RealBlock(b.imag())) -
           column_dot_sum(RealBlock(a.imag()), RealBlock(b.real()));
}

/// Combines terms carried at different log scales onto the larger scale.
inline TraceEstimate combine_terms(double det, double det_scale, double stoch, double stoch_scale,
                                   Index rank, EstimatorKind kind) {
    const double scale = std::max(det_scale, stoch_scale);
    TraceEstimate t;
    t.deterministic_term = det * std::exp(det_scale - scale);
    t.stochastic_term = stoch * std::exp(stoch_scale - scale);
    t.log_scale = scale;
    t.rank_r = rank;
    t.kind = kind;
    return t;
}

inline void check_projected(const RangeBasis &q, const RealBlock &g_tilde, const char *where) {
    if (g_tilde.rows() != q.dim()) throw DimensionMismatch(where, q.dim(), g_tilde.rows());
    if (g_tilde.cols() == 0) return;
    const double overlap = (q.q_block.transpose() * g_tilde).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, g_tilde.colwise().norm().maxCoeff());
    if (overlap > 1e-10 * scale) {
        throw InvalidArgument(std::string(where) + ": complement block is not orthogonal to Q (max |Q^T G~| = " +
                              std::to_string(overlap) + ")");
    }
}

}  // namespace detail

/// (1/M) sum_i z_i^T A z_i over M standard-normal probes.
inline TraceEstimate hutchinson_trace(const BlockAction &apply_a, Index dim, Index m, std::uint64_t seed,
                                      std::uint64_t stream) {
    if (m < 1) throw InvalidArgument("hutchinson_trace: M must be >= 1");
    const RandomBlock z = sample_gaussian_block(dim, m, seed, stream);
    const RealBlock az = apply_a(z.vectors);
    if (az.rows() != dim || az.cols() != m) throw DimensionMismatch("hutchinson_trace", dim, az.rows());
    TraceEstimate t;
    t.stochastic_term = detail::column_dot_sum(z.vectors, az) / static_cast<double>(m);
    t.rank_r = 0;
    return t;
}

/// Tr(Q^T A Q) + (1/r) Tr(G~^T A G~).
inline TraceEstimate lowrank_trace(const BlockAction &apply_a, const RangeBasis &q, const RealBlock &g_tilde,
                                   Index r) {
    if (r < 1) throw InvalidArgument("lowrank_trace: r must be >= 1");
    detail::check_projected(q, g_tilde, "lowrank_trace");
    TraceEstimate t;
    t.kind = EstimatorKind::LR_HTQT;
    t.rank_r = q.rank();
    t.deterministic_term = detail::column_dot_sum(q.q_block, apply_a(q.q_block));
    t.stochastic_term = detail::column_dot_sum(g_tilde, apply_a(g_tilde)) / static_cast<double>(r);
    return t;
}

/// Tr((BQ)^T (BQ)) + (1/r) Tr((BG~)^T (BG~)) for Hermitian B: the symmetric
/// form of the low-rank estimate of Tr(B^2). Both terms are sums of squares.
inline TraceEstimate lowrank_trace_symmetric(const BlockAction &apply_b, const RangeBasis &q,
                                             const RealBlock &g_tilde, Index r) {
    if (r < 1) throw InvalidArgument("lowrank_trace_symmetric: r must be >= 1");
    detail::check_projected(q, g_tilde, "lowrank_trace_symmetric");
    const RealBlock bq = apply_b(q.q_block);
    const RealBlock bg = apply_b(g_tilde);
    TraceEstimate t;
    t.kind = EstimatorKind::LR_LTQT;
    t.rank_r = q.rank();
    t.deterministic_term = bq.squaredNorm();
    t.stochastic_term = bg.squaredNorm() / static_cast<double>(r);
    return t;
}

namespace detail {

inline void check_beta(double beta, const char *where) {
    if (!std::isfinite(beta) || beta < 0.0) throw InvalidArgument(std::string(where) + ": beta must be finite and >= 0");
}

inline void check_obs(const PropagatorPlan &plan, const OperatorMatrix &obs, const char *where) {
    if (obs.dim() != plan.dim()) throw DimensionMismatch(where, plan.dim(), obs.dim());
}

}  // namespace detail

/// Plain typicality estimate of <O> from a given probe block. Numerator and
/// partition function reuse the same evolved vectors.
inline ExpectationEstimate qt_expectation_from_block(EstimatorKind kind, const PropagatorPlan &plan,
                                                     const OperatorMatrix &obs, double beta, const RealBlock &z) {
    if (is_low_rank(kind)) throw InvalidArgument("qt_expectation: expected HTQT or LTQT");
    detail::check_beta(beta, "qt_expectation");
    detail::check_obs(plan, obs, "qt_expectation");
    const Index m = z.cols();
    const double inv_m = 1.0 / static_cast<double>(m);
    TraceEstimate num, part;
    num.kind = part.kind = kind;
    if (kind == EstimatorKind::LTQT) {
        const ScaledBlock<double> u = plan.imag_time_apply(0.5 * beta, ScaledBlock<double>(z));
        part.stochastic_term = detail::column_dot_sum(u.vectors, u.vectors) * inv_m;
        num.stochastic_term = detail::column_dot_sum(u.vectors, obs.apply(u.vectors)) * inv_m;
        part.log_scale = num.log_scale = 2.0 * u.log_scale;
    } else {
        const ScaledBlock<double> a = plan.imag_time_apply(beta, ScaledBlock<double>(z));
        part.stochastic_term = detail::column_dot_sum(z, a.vectors) * inv_m;
        num.stochastic_term = detail::column_dot_sum(z, obs.apply(a.vectors)) * inv_m;
        part.log_scale = num.log_scale = a.log_scale;
    }
    return make_expectation(num, part, beta, m);
}

inline ExpectationEstimate qt_expectation(EstimatorKind kind, const PropagatorPlan &plan, const OperatorMatrix &obs,
                                          double beta, Index m, std::uint64_t seed, std::uint64_t realization) {
    if (m < 1) throw InvalidArgument("qt_expectation: M must be >= 1");
    const RandomBlock z = sample_gaussian_block(plan.dim(), m, seed, stream_id(realization, StreamRole::probe));
    return qt_expectation_from_block(kind, plan, obs, beta, z.vectors);
}

/// Vectors the low-rank estimators are evaluated on: Q and G~ (bras) and
/// their imaginary-time evolved partners (kets).
struct LowRankVectors {
    RangeBasis basis;
    RealBlock g_tilde;
    ScaledBlock<double> q_ket;
    ScaledBlock<double> g_ket;
};

/// Steps (1)-(3) of the low-rank pipeline plus the final evolution: Y = e^{-beta H} S,
/// Y = QR, G~ = G - Q Q^T G, then e^{-beta H/2} (symmetric) or e^{-beta H}
/// (asymmetric) applied to Q and G~. Costs 3r exponential applications.
inline LowRankVectors lowrank_vectors(EstimatorKind kind, const PropagatorPlan &plan, double beta,
                                      const RealBlock &s, const RealBlock &g) {
    if (s.cols() != g.cols()) throw InvalidArgument("lowrank_vectors: S and G must have the same width");
    const ScaledBlock<double> y = plan.imag_time_apply(beta, ScaledBlock<double>(s));
    LowRankVectors v;
    v.basis = orthogonalize_qr(y.vectors, kEstimatorRankTol);
    v.basis.source_beta = beta;
    v.basis.log_scale = y.log_scale;
    v.g_tilde = project_complement(v.basis, g);
    const double tau = is_symmetric(kind) ? 0.5 * beta : beta;
    v.q_ket = plan.imag_time_apply(tau, ScaledBlock<double>(v.basis.q_block));
    v.g_ket = plan.imag_time_apply(tau, ScaledBlock<double>(v.g_tilde));
    return v;
}

/// Numerator and partition function from bras, kets and O applied to the
/// kets. For the symmetric kind the kets double as bras:
/// <q|e^{-bH/2} O e^{-bH/2}|q> = ket^T O ket.
inline ExpectationEstimate lowrank_expectation_from_applied(EstimatorKind kind, double beta, const RealBlock &q_bra,
                                                            const ScaledBlock<double> &q_ket, const RealBlock &o_q_ket,
                                                            const RealBlock &g_bra, const ScaledBlock<double> &g_ket,
                                                            const RealBlock &o_g_ket) {
    const Index r = q_bra.cols();
    const double inv_r = 1.0 / static_cast<double>(g_bra.cols());
    double zq, zg, nq, ng, sq, sg;
    if (is_symmetric(kind)) {
        zq = detail::column_dot_sum(q_ket.vectors, q_ket.vectors);
        nq = detail::column_dot_sum(q_ket.vectors, o_q_ket);
        zg = detail::column_dot_sum(g_ket.vectors, g_ket.vectors) * inv_r;
        ng = detail::column_dot_sum(g_ket.vectors, o_g_ket) * inv_r;
        sq = 2.0 * q_ket.log_scale;
        sg = 2.0 * g_ket.log_scale;
    } else {
        zq = detail::column_dot_sum(q_bra, q_ket.vectors);
        nq = detail::column_dot_sum(q_bra, o_q_ket);
        zg = detail::column_dot_sum(g_bra, g_ket.vectors) * inv_r;
        ng = detail::column_dot_sum(g_bra, o_g_ket) * inv_r;
        sq = q_ket.log_scale;
        sg = g_ket.log_scale;
    }
    const TraceEstimate num = detail::combine_terms(nq, sq, ng, sg, r, kind);
    const TraceEstimate part = detail::combine_terms(zq, sq, zg, sg, r, kind);
    return make_expectation(num, part, beta, r);
}

inline ExpectationEstimate lowrank_expectation_from_vectors(EstimatorKind kind, const OperatorMatrix &obs,
                                                            double beta, const RealBlock &q_bra,
                                                            const ScaledBlock<double> &q_ket, const RealBlock &g_bra,
                                                            const ScaledBlock<double> &g_ket) {
    return lowrank_expectation_from_applied(kind, beta, q_bra, q_ket, obs.apply(q_ket.vectors), g_bra, g_ket,
                                            obs.apply(g_ket.vectors));
}

inline ExpectationEstimate lrqt_expectation_from_blocks(EstimatorKind kind, const PropagatorPlan &plan,
                                                        const OperatorMatrix &obs, double beta, const RealBlock &s,
                                                        const RealBlock &g) {
    if (!is_low_rank(kind)) throw InvalidArgument("lrqt_expectation: expected LR_HTQT or LR_LTQT");
    detail::check_beta(beta, "lrqt_expectation");
    detail::check_obs(plan, obs, "lrqt_expectation");
    const LowRankVectors v = lowrank_vectors(kind, plan, beta, s, g);
    return lowrank_expectation_from_vectors(kind, obs, beta, v.basis.q_block, v.q_ket, v.g_tilde, v.g_ket);
}

inline ExpectationEstimate lrqt_expectation(EstimatorKind kind, const PropagatorPlan &plan, const OperatorMatrix &obs,
                                            double beta, Index r, std::uint64_t seed, std::uint64_t realization) {
    if (r < 1) throw InvalidArgument("lrqt_expectation: r must be >= 1");
    if (r > plan.dim()) throw InvalidArgument("lrqt_expectation: r exceeds the Hilbert-space dimension");
    const RandomBlock s =
        sample_gaussian_block(plan.dim(), r, seed, stream_id(realization, StreamRole::range_sketch));
    const RandomBlock g = sample_gaussian_block(plan.dim(), r, seed, stream_id(realization, StreamRole::complement));
    return lrqt_expectation_from_blocks(kind, plan, obs, beta, s.vectors, g.vectors);
}

/// Dispatches on the estimator family; `size` is M for plain kinds, r for low-rank kinds.
inline ExpectationEstimate estimate_expectation(EstimatorKind kind, const PropagatorPlan &plan,
                                                const OperatorMatrix &obs, double beta, Index size,
                                                std::uint64_t seed, std::uint64_t realization) {
    return is_low_rank(kind) ? lrqt_expectation(kind, plan, obs, beta, size, seed, realization)
                             : qt_expectation(kind, plan, obs, beta, size, seed, realization);
}

}  // namespace lrqt
