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
#include <span>
#include <vector>

#include "lrqt/dynamics.hpp"
#include "lrqt/estimators.hpp"
#include "lrqt/frames.hpp"

namespace lrqt {

// Batched evaluation of whole temperature or time grids in an eigenbasis
// frame. Results equal the generic per-point functions on the same streams up
// to roundoff, and the plan counters advance by the same logical amounts.
//
// Plain typicality uses the probe Gram matrix rho = Z Z^T. With D the diagonal
// Boltzmann factor and P = O (.) rho (entrywise):
//
//   sum_i z_i^T D^{1/2} O D^{1/2} z_i = d^T P d,   d = diag(D^{1/2})
//   sum_i z_i^T O D z_i               = 1^T P D
//
// so one Gram matrix serves every temperature.

namespace detail {

/// Boltzmann factors e^{-tau (E - E0)} as columns, one per tau.
inline RealBlock decay_columns(const RealVector &energies, std::span<const double> taus) {
    const double e0 = energies.size() ? energies[0] : 0.0;
    RealBlock out(energies.size(), static_cast<Index>(taus.size()));
    for (std::size_t j = 0; j < taus.size(); ++j) {
        out.col(static_cast<Index>(j)) = (-taus[j] * (energies.array() - e0)).exp().matrix();
    }
    return out;
}

inline void check_betas(std::span<const double> betas, const char *where) {
    if (betas.empty()) throw InvalidArgument(std::string(where) + ": empty beta grid");
    for (double b : betas) check_beta(b, where);
}

}  // namespace detail

class SpectralStaticKernel {
  public:
    explicit SpectralStaticKernel(const EigenbasisFrame &frame) : frame_(frame) {
        if (!frame_.spectrum->diagonal_frame()) throw InvalidArgument("SpectralStaticKernel: need a diagonal frame");
        detail::check_obs(frame_.plan, *frame_.observable, "SpectralStaticKernel");
        if (frame_.observable->is_sparse()) dense_copy_ = frame_.observable->to_dense();
    }

    const EigenbasisFrame &frame() const { return frame_; }

    /// Plain typicality at every beta from one probe block.
    std::vector<ExpectationEstimate> qt_sweep(EstimatorKind kind, std::span<const double> betas, Index m,
                                              std::uint64_t seed, std::uint64_t realization) const {
        const EstimatorKind kinds[] = {kind};
        return std::move(qt_sweeps(kinds, betas, m, seed, realization).front());
    }

    /// Several plain kinds from the same probe block; they share one Gram
    /// matrix. charge[i], when given, receives the cost of kinds[i] in place
    /// of the frame's counters.
    std::vector<std::vector<ExpectationEstimate>> qt_sweeps(std::span<const EstimatorKind> kinds,
                                                            std::span<const double> betas, Index m,
                                                            std::uint64_t seed, std::uint64_t realization,
                                                            std::span<CostCounters *const> charge = {}) const {
        for (auto kind : kinds) {
            if (is_low_rank(kind)) throw InvalidArgument("qt_sweep: expected HTQT or LTQT");
        }
        if (m < 1) throw InvalidArgument("qt_sweep: M must be >= 1");
        detail::check_betas(betas, "qt_sweep");
        const RandomBlock z = sample_gaussian_block(frame_.plan.dim(), m, seed, stream_id(realization, StreamRole::probe));
        return qt_sweeps_from_block(kinds, betas, z.vectors, charge);
    }

    std::vector<std::vector<ExpectationEstimate>> qt_sweeps_from_block(std::span<const EstimatorKind> kinds,
                                                                       std::span<const double> betas,
                                                                       const RealBlock &z,
                                                                       std::span<CostCounters *const> charge = {}) const {
        if (!charge.empty() && charge.size() != kinds.size()) {
            throw InvalidArgument("qt_sweeps: need one counter per kind");
        }
        const Index n = frame_.plan.dim();
        const Index m = z.cols();
        const double inv_m = 1.0 / static_cast<double>(m);
        const RealVector &energies = frame_.spectrum->eigenvalues;
        const double e0 = frame_.spectrum->ground_energy();
        const RealBlock &o = frame_.observable->is_sparse() ? dense_copy_ : frame_.observable->dense();

        // P = O (.) Z Z^T, built in a per-thread buffer: at dim ~ 3e3 fresh
        // allocations of this size cost more than the arithmetic
        thread_local RealBlock p;
        p.resize(n, n);
        p.noalias() = z * z.transpose();
        const RealVector rho_diag = p.diagonal();
        RealVector colsum = RealVector::Zero(n);
        for (Index b = 0; b < n; ++b) {
            double acc = 0.0;
            for (Index a = 0; a < n; ++a) {
                p(a, b) *= o(a, b);
                acc += p(a, b);
            }
            colsum[b] = acc;
        }

        std::vector<std::vector<ExpectationEstimate>> all;
        for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
            const EstimatorKind kind = kinds[ki];
            CostCounters &counters = charge.empty() ? frame_.plan.counters() : *charge[ki];
            std::vector<double> taus;
            for (double b : betas) taus.push_back(kind == EstimatorKind::LTQT ? 0.5 * b : b);
            const RealBlock d = detail::decay_columns(energies, taus);
            counters.expm_applications += m * static_cast<long long>(betas.size());
            std::vector<ExpectationEstimate> out;
            out.reserve(betas.size());
            if (kind == EstimatorKind::LTQT) {
                const RealBlock pd = p * d;
                for (std::size_t j = 0; j < betas.size(); ++j) {
                    const auto col = d.col(static_cast<Index>(j));
                    TraceEstimate num, part;
                    num.kind = part.kind = kind;
                    part.stochastic_term = col.cwiseProduct(col).dot(rho_diag) * inv_m;
                    num.stochastic_term = col.dot(pd.col(static_cast<Index>(j))) * inv_m;
                    part.log_scale = num.log_scale = 2.0 * (-taus[j] * e0);
                    out.push_back(make_expectation(num, part, betas[j], m));
                }
            } else {
                for (std::size_t j = 0; j < betas.size(); ++j) {
                    const auto col = d.col(static_cast<Index>(j));
                    TraceEstimate num, part;
                    num.kind = part.kind = kind;
                    part.stochastic_term = col.dot(rho_diag) * inv_m;
                    num.stochastic_term = col.dot(colsum) * inv_m;
                    part.log_scale = num.log_scale = -taus[j] * e0;
                    out.push_back(make_expectation(num, part, betas[j], m));
                }
            }
            all.push_back(std::move(out));
        }
        return all;
    }

    /// Low-rank estimates at every beta; O is applied to all kets in one product.
    std::vector<ExpectationEstimate> lrqt_sweep(EstimatorKind kind, std::span<const double> betas, Index r,
                                                std::uint64_t seed, std::uint64_t realization) const {
        if (!is_low_rank(kind)) throw InvalidArgument("lrqt_sweep: expected LR_HTQT or LR_LTQT");
        if (r < 1 || r > frame_.plan.dim()) throw InvalidArgument("lrqt_sweep: r must be in [1, dim]");
        detail::check_betas(betas, "lrqt_sweep");
        const Index n = frame_.plan.dim();
        const RandomBlock s = sample_gaussian_block(n, r, seed, stream_id(realization, StreamRole::range_sketch));
        const RandomBlock g = sample_gaussian_block(n, r, seed, stream_id(realization, StreamRole::complement));

        std::vector<LowRankVectors> vecs;
        vecs.reserve(betas.size());
        RealBlock kets(n, 2 * r * static_cast<Index>(betas.size()));
        for (std::size_t j = 0; j < betas.size(); ++j) {
            vecs.push_back(lowrank_vectors(kind, frame_.plan, betas[j], s.vectors, g.vectors));
            kets.middleCols(2 * r * static_cast<Index>(j), r) = vecs.back().q_ket.vectors;
            kets.middleCols(2 * r * static_cast<Index>(j) + r, r) = vecs.back().g_ket.vectors;
        }
        const RealBlock o_kets = frame_.observable->apply(kets);

        std::vector<ExpectationEstimate> out;
        out.reserve(betas.size());
        for (std::size_t j = 0; j < betas.size(); ++j) {
            const LowRankVectors &v = vecs[j];
            const Index base = 2 * r * static_cast<Index>(j);
            out.push_back(lowrank_expectation_from_applied(kind, betas[j], v.basis.q_block, v.q_ket,
                                                           o_kets.middleCols(base, r), v.g_tilde, v.g_ket,
                                                           o_kets.middleCols(base + r, r)));
        }
        return out;
    }

  private:
    EigenbasisFrame frame_;
    RealBlock dense_copy_;
};

/// Quench series through the eigenbasis of the final Hamiltonian. With bra
/// and ket blocks B, K rotated into that basis, sigma = B K^T and
/// P = O_final (.) sigma, the numerator at time t is
///
///   Re: c^T P c + s^T P s,   Im: s^T P c - c^T P s,   c = cos(E t), s = sin(E t)
///
/// which avoids evolving any vector step by step.
class SpectralQuenchKernel {
  public:
    explicit SpectralQuenchKernel(const QuenchFrame &frame) : frame_(frame) {
        if (!frame_.init_spectrum->diagonal_frame()) {
            throw InvalidArgument("SpectralQuenchKernel: initial spectrum must be a diagonal frame");
        }
    }

    const QuenchFrame &frame() const { return frame_; }

    std::vector<QuenchPoint> dqt(EstimatorKind kind, double beta, std::span<const double> t_grid, Index m,
                                 std::uint64_t seed, std::uint64_t realization) const {
        if (is_low_rank(kind)) throw InvalidArgument("dqt: expected HTQT or LTQT");
        if (m < 1) throw InvalidArgument("dqt: M must be >= 1");
        check(beta, t_grid);
        const RandomBlock z = sample_gaussian_block(frame_.plan_init.dim(), m, seed, stream_id(realization, StreamRole::probe));
        detail::EvolvedGroup group;
        group.weight = 1.0 / static_cast<double>(m);
        if (kind == EstimatorKind::LTQT) {
            group.ket = frame_.plan_init.imag_time_apply(0.5 * beta, ScaledBlock<double>(z.vectors));
            group.symmetric = true;
        } else {
            group.ket = frame_.plan_init.imag_time_apply(beta, ScaledBlock<double>(z.vectors));
            group.bra = z.vectors;
            group.symmetric = false;
        }
        return series({group}, kind, beta, t_grid, m);
    }

    std::vector<QuenchPoint> lrdqt(EstimatorKind kind, double beta, std::span<const double> t_grid, Index r,
                                   std::uint64_t seed, std::uint64_t realization) const {
        if (!is_low_rank(kind)) throw InvalidArgument("lrdqt: expected LR_HTQT or LR_LTQT");
        const Index n = frame_.plan_init.dim();
        if (r < 1 || r > n) throw InvalidArgument("lrdqt: r must be in [1, dim]");
        check(beta, t_grid);
        const RandomBlock s = sample_gaussian_block(n, r, seed, stream_id(realization, StreamRole::range_sketch));
        const RandomBlock g = sample_gaussian_block(n, r, seed, stream_id(realization, StreamRole::complement));
        const LowRankVectors v = lowrank_vectors(kind, frame_.plan_init, beta, s.vectors, g.vectors);
        const bool sym = is_symmetric(kind);
        detail::EvolvedGroup gq{v.basis.q_block, v.q_ket, 1.0, sym};
        detail::EvolvedGroup gg{v.g_tilde, v.g_ket, 1.0 / static_cast<double>(r), sym};
        return series({gq, gg}, kind, beta, t_grid, r);
    }

  private:
    void check(double beta, std::span<const double> t_grid) const {
        detail::check_beta(beta, "quench kernel");
        if (t_grid.empty() || t_grid.front() != 0.0) throw InvalidArgument("quench kernel: t_grid must start at 0");
        for (std::size_t i = 1; i < t_grid.size(); ++i) {
            if (!(t_grid[i] > t_grid[i - 1])) throw InvalidArgument("quench kernel: t_grid must be strictly ascending");
        }
    }

    std::vector<QuenchPoint> series(const std::vector<detail::EvolvedGroup> &groups, EstimatorKind kind, double beta,
                                    std::span<const double> t_grid, Index samples) const {
        const Index n = frame_.plan_init.dim();
        const Index nt = static_cast<Index>(t_grid.size());
        const RealVector &e1 = frame_.final_spectrum->eigenvalues;
        RealBlock cs(n, 2 * nt);
        for (Index j = 0; j < nt; ++j) {
            cs.col(j) = (e1 * t_grid[static_cast<std::size_t>(j)]).array().cos().matrix();
            cs.col(nt + j) = (e1 * t_grid[static_cast<std::size_t>(j)]).array().sin().matrix();
        }

        std::vector<double> z_terms, z_scales;
        std::vector<RealVector> re_terms, im_terms;
        long long columns = 0;
        for (const auto &g : groups) {
            const RealBlock &ket = g.ket.vectors;
            const RealBlock &bra = g.symmetric ? ket : g.bra;
            z_terms.push_back(g.weight * detail::column_dot_sum(bra, ket));
            z_scales.push_back(g.symmetric ? 2.0 * g.ket.log_scale : g.ket.log_scale);
            columns += g.symmetric ? ket.cols() : 2 * ket.cols();

            const RealBlock ket1 = frame_.to_final() * ket;
            RealBlock sigma;
            if (g.symmetric) {
                sigma = ket1 * ket1.transpose();
            } else {
                const RealBlock bra1 = frame_.to_final() * bra;
                sigma = bra1 * ket1.transpose();
            }
            const RealBlock p = frame_.observable_final->cwiseProduct(sigma);
            const RealBlock pcs = p * cs;
            RealVector re(nt), im(nt);
            for (Index j = 0; j < nt; ++j) {
                const auto c = cs.col(j);
                const auto s = cs.col(nt + j);
                re[j] = g.weight * (c.dot(pcs.col(j)) + s.dot(pcs.col(nt + j)));
                im[j] = g.weight * (s.dot(pcs.col(j)) - c.dot(pcs.col(nt + j)));
            }
            re_terms.push_back(std::move(re));
            im_terms.push_back(std::move(im));
        }
        frame_.plan_final.counters().realtime_applications += columns * nt;

        const Index rank = is_low_rank(kind) ? samples : 0;
        const auto assemble = [&](const std::vector<double> &terms) {
            if (terms.size() == 1) {
                TraceEstimate t;
                t.stochastic_term = terms[0];
                t.log_scale = z_scales[0];
                t.kind = kind;
                return t;
            }
            return detail::combine_terms(terms[0], z_scales[0], terms[1], z_scales[1], rank, kind);
        };
        const TraceEstimate partition = assemble(z_terms);
        std::vector<QuenchPoint> out;
        out.reserve(t_grid.size());
        for (Index j = 0; j < nt; ++j) {
            std::vector<double> re, im;
            for (std::size_t k = 0; k < groups.size(); ++k) {
                re.push_back(re_terms[k][j]);
                im.push_back(im_terms[k][j]);
            }
            QuenchPoint pt;
            pt.t = t_grid[static_cast<std::size_t>(j)];
            pt.estimate = make_expectation(assemble(re), partition, beta, samples);
            pt.imaginary_part = make_expectation(assemble(im), partition, beta, samples).value;
            out.push_back(pt);
        }
        return out;
    }

    QuenchFrame frame_;
};

}  // namespace lrqt
