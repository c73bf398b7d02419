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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lrqt/estimators.hpp"
#include "lrqt/propagator.hpp"
#include "lrqt/randrange.hpp"

namespace lrqt {

// Multi-temperature sweeps. With Y(tau) = e^{-tau H} S and G(tau) = e^{-tau H} G
// cached along one trajectory each, every temperature reuses them:
//
//   e^{-tau H} Q(beta)  = Y(beta + tau) R(beta)^{-1}
//   e^{-tau H} G~       = G(tau) - (e^{-tau H} Q(beta)) Q(beta)^T G(0)
//
// so no exponential is re-applied per temperature.

inline constexpr double kMaxRCondition = 1e12;

/// Furthest imaginary time a sweep up to beta_max must reach.
inline double required_tau_max(EstimatorKind kind, double beta_max) {
    if (!is_low_rank(kind)) throw InvalidArgument("required_tau_max: expected a low-rank kind");
    return is_symmetric(kind) ? 1.5 * beta_max : 2.0 * beta_max;
}

/// Sorted imaginary times a sweep needs (including 0): Y at beta and 1.5 beta
/// plus G at beta/2 for LR_LTQT; Y at beta and 2 beta plus G at beta for LR_HTQT.
inline std::vector<double> required_taus(EstimatorKind kind, std::span<const double> betas) {
    if (!is_low_rank(kind)) throw InvalidArgument("required_taus: expected a low-rank kind");
    std::vector<double> taus{0.0};
    for (double b : betas) {
        taus.push_back(b);
        if (is_symmetric(kind)) {
            taus.push_back(1.5 * b);
            taus.push_back(0.5 * b);
        } else {
            taus.push_back(2.0 * b);
        }
    }
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    return taus;
}

/// Imaginary-time families Y(tau) and G(tau) at a fixed set of checkpoints.
class CachedEvolution {
  public:
    CachedEvolution(std::vector<double> taus, std::vector<ScaledBlock<double>> y, std::vector<ScaledBlock<double>> g,
                    std::uint64_t seed, std::uint64_t realization)
        : taus_(std::move(taus)), y_(std::move(y)), g_(std::move(g)), seed_(seed), realization_(realization) {}

    const std::vector<double> &taus() const { return taus_; }
    double tau_max() const { return taus_.empty() ? 0.0 : taus_.back(); }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t realization() const { return realization_; }
    Index rank() const { return y_.empty() ? 0 : y_.front().cols(); }

    bool contains(double tau) const { return find(tau) >= 0; }
    const ScaledBlock<double> &y(double tau) const { return y_[lookup(tau)]; }
    const ScaledBlock<double> &g(double tau) const { return g_[lookup(tau)]; }

  private:
    // checkpoints are matched with a relative tolerance: beta + beta/2 and
    // 1.5 * beta may differ in the last bit
    std::ptrdiff_t find(double tau) const {
        for (std::size_t i = 0; i < taus_.size(); ++i) {
            if (std::abs(taus_[i] - tau) <= 1e-12 * std::max(1.0, std::abs(tau))) return static_cast<std::ptrdiff_t>(i);
        }
        return -1;
    }
    std::size_t lookup(double tau) const {
        const auto i = find(tau);
        if (i < 0) throw InvalidArgument("CachedEvolution: imaginary time " + std::to_string(tau) + " is not cached");
        return static_cast<std::size_t>(i);
    }

    std::vector<double> taus_;
    std::vector<ScaledBlock<double>> y_;
    std::vector<ScaledBlock<double>> g_;
    std::uint64_t seed_;
    std::uint64_t realization_;
};

inline CachedEvolution build_cache(const PropagatorPlan &plan, const RandomBlock &s, const RandomBlock &g,
                                   std::span<const double> required) {
    std::vector<double> taus(required.begin(), required.end());
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    if (taus.empty() || taus.front() != 0.0) taus.insert(taus.begin(), 0.0);
    if (taus.front() < 0.0) throw InvalidArgument("build_cache: imaginary times must be >= 0");
    auto y = plan.imag_time_trajectory(taus, ScaledBlock<double>(s.vectors));
    auto gs = plan.imag_time_trajectory(taus, ScaledBlock<double>(g.vectors));
    const std::uint64_t realization = s.stream_id / kStreamRoles;
    return CachedEvolution(std::move(taus), std::move(y), std::move(gs), s.seed, realization);
}

enum class Orthogonalization { qr, cholesky };

/// Q(beta) and R(beta) from the cached Y(beta). R carries Y(beta)'s log scale.
inline RangeBasis cached_basis(const CachedEvolution &cache, double beta, Orthogonalization method = Orthogonalization::qr) {
    const ScaledBlock<double> &y = cache.y(beta);
    RangeBasis basis = method == Orthogonalization::qr ? orthogonalize_qr(y.vectors, kEstimatorRankTol)
                                                        : orthogonalize_cholesky(y.vectors);
    basis.source_beta = beta;
    basis.log_scale = y.log_scale;
    return basis;
}

namespace detail {

inline double triangular_condition(const RealBlock &r) {
    const RealVector sv = Eigen::JacobiSVD<RealBlock>(r).singularValues();
    const double smin = sv[sv.size() - 1];
    return smin > 0.0 ? sv[0] / smin : std::numeric_limits<double>::infinity();
}

inline void check_condition(const RangeBasis &basis) {
    const double cond = triangular_condition(basis.r_factor);
    if (!(cond <= kMaxRCondition)) {
        throw IllConditioned("evolved_q: R(beta) condition estimate " + std::to_string(cond) + " exceeds " +
                                 std::to_string(kMaxRCondition),
                             cond);
    }
}

}  // namespace detail

/// e^{-tau H} Q(beta) = Y(beta + tau) R(beta)^{-1}, by triangular solve.
inline ScaledBlock<double> evolved_q(const CachedEvolution &cache, const RangeBasis &basis, double tau) {
    detail::check_condition(basis);
    const ScaledBlock<double> &y = cache.y(basis.source_beta + tau);
    RealBlock v = basis.r_factor.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(y.vectors);
    return ScaledBlock<double>(std::move(v), y.log_scale - basis.log_scale, tau);
}

inline ScaledBlock<double> evolved_q(const CachedEvolution &cache, double beta, double tau,
                                     Orthogonalization method = Orthogonalization::qr) {
    return evolved_q(cache, cached_basis(cache, beta, method), tau);
}

/// e^{-tau H} G~ = G(tau) - (e^{-tau H} Q(beta)) Q(beta)^T G(0).
inline ScaledBlock<double> evolved_g_tilde(const CachedEvolution &cache, const RangeBasis &basis, double tau) {
    const ScaledBlock<double> &g_tau = cache.g(tau);
    const ScaledBlock<double> &g0 = cache.g(0.0);
    const ScaledBlock<double> eq = evolved_q(cache, basis, tau);
    const RealBlock overlap = basis.q_block.transpose() * g0.represented();
    // bring both pieces to the scale of G(tau)
    RealBlock v = g_tau.vectors - std::exp(eq.log_scale - g_tau.log_scale) * (eq.vectors * overlap);
    return ScaledBlock<double>(std::move(v), g_tau.log_scale, tau);
}

inline ScaledBlock<double> evolved_g_tilde(const CachedEvolution &cache, double beta, double tau,
                                           Orthogonalization method = Orthogonalization::qr) {
    return evolved_g_tilde(cache, cached_basis(cache, beta, method), tau);
}

struct TemperatureSweep {
    std::vector<double> beta_grid;
    EstimatorKind kind = EstimatorKind::LR_LTQT;
    Index rank_r = 1;
};

struct SweepOptions {
    Orthogonalization orthogonalization = Orthogonalization::qr;
};

inline void validate_sweep(const TemperatureSweep &sweep) {
    if (!is_low_rank(sweep.kind)) throw InvalidArgument("sweep_lrqt: expected a low-rank kind");
    if (sweep.rank_r < 1) throw InvalidArgument("sweep_lrqt: rank must be >= 1");
    if (sweep.beta_grid.empty()) throw InvalidArgument("sweep_lrqt: empty beta grid");
    for (std::size_t i = 0; i < sweep.beta_grid.size(); ++i) {
        if (!(sweep.beta_grid[i] > 0.0) || !std::isfinite(sweep.beta_grid[i])) {
            throw InvalidArgument("sweep_lrqt: betas must be finite and > 0");
        }
        if (i > 0 && !(sweep.beta_grid[i] > sweep.beta_grid[i - 1])) {
            throw InvalidArgument("sweep_lrqt: beta grid must be strictly increasing");
        }
    }
}

/// Per-temperature LR estimates from one cache; the estimates agree with
/// independent lrqt_expectation calls on the same streams.
inline std::vector<ExpectationEstimate> sweep_lrqt(const TemperatureSweep &sweep, const PropagatorPlan &plan,
                                                   const OperatorMatrix &obs, std::uint64_t seed,
                                                   std::uint64_t realization, const SweepOptions &options = {}) {
    validate_sweep(sweep);
    detail::check_obs(plan, obs, "sweep_lrqt");
    const Index r = sweep.rank_r;
    const RandomBlock s = sample_gaussian_block(plan.dim(), r, seed, stream_id(realization, StreamRole::range_sketch));
    const RandomBlock g = sample_gaussian_block(plan.dim(), r, seed, stream_id(realization, StreamRole::complement));
    const auto taus = required_taus(sweep.kind, sweep.beta_grid);
    const CachedEvolution cache = build_cache(plan, s, g, taus);

    std::vector<ExpectationEstimate> out;
    out.reserve(sweep.beta_grid.size());
    for (double beta : sweep.beta_grid) {
        const RangeBasis basis = cached_basis(cache, beta, options.orthogonalization);
        const RealBlock g_tilde = project_complement(basis, g.vectors);
        const double tau = is_symmetric(sweep.kind) ? 0.5 * beta : beta;
        const ScaledBlock<double> q_ket = evolved_q(cache, basis, tau);
        const ScaledBlock<double> g_ket = evolved_g_tilde(cache, basis, tau);
        out.push_back(lowrank_expectation_from_vectors(sweep.kind, obs, beta, basis.q_block, q_ket, g_tilde, g_ket));
    }
    return out;
}

}  // namespace lrqt
