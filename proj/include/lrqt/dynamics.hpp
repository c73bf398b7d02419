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

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "lrqt/estimators.hpp"
#include "lrqt/propagator.hpp"

namespace lrqt {

/// Thermal state of h_init at inverse temperature beta, evolved under h_final.
struct QuenchProtocol {
    std::shared_ptr<const OperatorMatrix> h_init;
    std::shared_ptr<const OperatorMatrix> h_final;
    double beta = 0.5;
    std::vector<double> t_grid;
};

/// 0, step, 2 step, ..., t_max (inclusive up to roundoff).
inline std::vector<double> uniform_time_grid(double t_max, double step) {
    if (!(step > 0.0) || !(t_max >= 0.0)) throw InvalidArgument("uniform_time_grid: need step > 0 and t_max >= 0");
    const auto n = static_cast<long long>(std::floor(t_max / step + 1e-9));
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(n + 1));
    for (long long i = 0; i <= n; ++i) grid.push_back(static_cast<double>(i) * step);
    return grid;
}

inline std::vector<double> default_time_grid() { return uniform_time_grid(10.0, 0.1); }

struct QuenchPoint {
    double t = 0.0;
    ExpectationEstimate estimate;
    /// Imaginary part of the numerator ratio; roundoff for symmetric kinds.
    double imaginary_part = 0.0;
};

namespace detail {

inline void validate_protocol(const QuenchProtocol &p, const PropagatorPlan &plan_init, const PropagatorPlan &plan_final,
                              const OperatorMatrix &obs) {
    if (p.t_grid.empty() || p.t_grid.front() != 0.0) throw InvalidArgument("quench: t_grid must start at 0");
    for (std::size_t i = 1; i < p.t_grid.size(); ++i) {
        if (!(p.t_grid[i] > p.t_grid[i - 1])) throw InvalidArgument("quench: t_grid must be strictly ascending");
    }
    if (!std::isfinite(p.beta) || p.beta < 0.0) throw InvalidArgument("quench: beta must be finite and >= 0");
    const Index n = plan_init.dim();
    if (plan_final.dim() != n) throw DimensionMismatch("quench", n, plan_final.dim());
    if (obs.dim() != n) throw DimensionMismatch("quench", n, obs.dim());
    if (p.h_init && p.h_init->dim() != n) throw DimensionMismatch("quench", n, p.h_init->dim());
    if (p.h_final && p.h_final->dim() != n) throw DimensionMismatch("quench", n, p.h_final->dim());
}

/// One weighted group of bra/ket columns. For symmetric placements the bra
/// and ket coincide and only one block is evolved in real time.
struct EvolvedGroup {
    RealBlock bra;
    ScaledBlock<double> ket;
    double weight = 1.0;
    bool symmetric = true;
};

inline std::vector<QuenchPoint> evolve_groups(const std::vector<EvolvedGroup> &groups, const PropagatorPlan &plan_final,
                                              const OperatorMatrix &obs, const QuenchProtocol &p, EstimatorKind kind,
                                              Index samples) {
    // Z is fixed by the imaginary-time vectors at t = 0
    std::vector<double> z_terms, z_scales;
    for (const auto &g : groups) {
        const double z = g.symmetric ? column_dot_sum(g.ket.vectors, g.ket.vectors) : column_dot_sum(g.bra, g.ket.vectors);
        z_terms.push_back(g.weight * z);
        z_scales.push_back(g.symmetric ? 2.0 * g.ket.log_scale : g.ket.log_scale);
    }
    const Index rank = is_low_rank(kind) ? samples : 0;
    const auto assemble = [&](const std::vector<double> &terms) {
        if (terms.size() == 1) {
            TraceEstimate t;
            t.stochastic_term = terms[0];
            t.log_scale = z_scales[0];
            t.kind = kind;
            return t;
        }
        return combine_terms(terms[0], z_scales[0], terms[1], z_scales[1], rank, kind);
    };
    const TraceEstimate partition = assemble(z_terms);

    std::vector<QuenchPoint> out;
    out.reserve(p.t_grid.size());
    for (double t : p.t_grid) {
        std::vector<double> re, im;
        for (const auto &g : groups) {
            const ScaledBlock<Complex> ket_t = plan_final.real_time_apply(t, g.ket.to_complex());
            const ComplexBlock o_ket = obs.apply(ket_t.vectors);
            if (g.symmetric) {
                re.push_back(g.weight * column_dot_sum(ket_t.vectors, o_ket));
                im.push_back(g.weight * column_dot_sum_imag(ket_t.vectors, o_ket));
            } else {
                const ScaledBlock<Complex> bra_t =
                    plan_final.real_time_apply(t, ScaledBlock<double>(g.bra).to_complex());
                re.push_back(g.weight * column_dot_sum(bra_t.vectors, o_ket));
                im.push_back(g.weight * column_dot_sum_imag(bra_t.vectors, o_ket));
            }
        }
        const TraceEstimate num = assemble(re);
        const TraceEstimate num_im = assemble(im);
        QuenchPoint pt;
        pt.t = t;
        pt.estimate = make_expectation(num, partition, p.beta, samples);
        pt.imaginary_part = make_expectation(num_im, partition, p.beta, samples).value;
        out.push_back(pt);
    }
    return out;
}

}  // namespace detail

/// Dynamical typicality: thermal weights from plan_init, O(t) = e^{iH1 t} O e^{-iH1 t}
/// realized by evolving bra and ket blocks under plan_final.
inline std::vector<QuenchPoint> dqt_quench(const QuenchProtocol &protocol, const PropagatorPlan &plan_init,
                                           const PropagatorPlan &plan_final, const OperatorMatrix &obs,
                                           EstimatorKind kind, Index m, std::uint64_t seed, std::uint64_t realization) {
    if (is_low_rank(kind)) throw InvalidArgument("dqt_quench: expected HTQT or LTQT");
    if (m < 1) throw InvalidArgument("dqt_quench: M must be >= 1");
    detail::validate_protocol(protocol, plan_init, plan_final, obs);
    const RandomBlock z = sample_gaussian_block(plan_init.dim(), m, seed, stream_id(realization, StreamRole::probe));
    const double inv_m = 1.0 / static_cast<double>(m);
    detail::EvolvedGroup group;
    group.weight = inv_m;
    if (kind == EstimatorKind::LTQT) {
        group.ket = plan_init.imag_time_apply(0.5 * protocol.beta, ScaledBlock<double>(z.vectors));
        group.symmetric = true;
    } else {
        group.ket = plan_init.imag_time_apply(protocol.beta, ScaledBlock<double>(z.vectors));
        group.bra = z.vectors;
        group.symmetric = false;
    }
    return detail::evolve_groups({group}, plan_final, obs, protocol, kind, m);
}

/// Low-rank dynamical typicality: Q and G~ come from the initial thermal
/// state; only the 2r vectors {q_i}, {g~_i} (symmetric kind) are evolved in
/// real time.
inline std::vector<QuenchPoint> lrdqt_quench(const QuenchProtocol &protocol, const PropagatorPlan &plan_init,
                                             const PropagatorPlan &plan_final, const OperatorMatrix &obs,
                                             EstimatorKind kind, Index r, std::uint64_t seed, std::uint64_t realization) {
    if (!is_low_rank(kind)) throw InvalidArgument("lrdqt_quench: expected LR_HTQT or LR_LTQT");
    if (r < 1 || r > plan_init.dim()) throw InvalidArgument("lrdqt_quench: r must be in [1, dim]");
    detail::validate_protocol(protocol, plan_init, plan_final, obs);
    const Index n = plan_init.dim();
    const RandomBlock s = sample_gaussian_block(n, r, seed, stream_id(realization, StreamRole::range_sketch));
    const RandomBlock g = sample_gaussian_block(n, r, seed, stream_id(realization, StreamRole::complement));
    const LowRankVectors v = lowrank_vectors(kind, plan_init, protocol.beta, s.vectors, g.vectors);
    const bool sym = is_symmetric(kind);
    detail::EvolvedGroup gq{v.basis.q_block, v.q_ket, 1.0, sym};
    detail::EvolvedGroup gg{v.g_tilde, v.g_ket, 1.0 / static_cast<double>(r), sym};
    return detail::evolve_groups({gq, gg}, plan_final, obs, protocol, kind, r);
}

}  // namespace lrqt
