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
#include <atomic>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lrqt/lanczos.hpp"
#include "lrqt/lattice_model.hpp"
#include "lrqt/spectral_oracle.hpp"
#include "lrqt/types.hpp"

namespace lrqt {

/// A block of column vectors sharing one multiplicative factor e^{log_scale}.
template <BlockScalar Scalar>
struct ScaledBlock {
    Block<Scalar> vectors;
    double log_scale = 0.0;
    double source_tau = 0.0;

    ScaledBlock() = default;
    explicit ScaledBlock(Block<Scalar> v, double log_scale_ = 0.0, double source_tau_ = 0.0)
        : vectors(std::move(v)), log_scale(log_scale_), source_tau(source_tau_) {}

    Index rows() const { return vectors.rows(); }
    Index cols() const { return vectors.cols(); }

    Block<Scalar> represented() const { return std::exp(log_scale) * vectors; }

    /// Same represented block with the factor moved to `new_log_scale`.
    ScaledBlock rescaled(double new_log_scale) const {
        return ScaledBlock(std::exp(log_scale - new_log_scale) * vectors, new_log_scale, source_tau);
    }

    /// Moves the largest entry magnitude into the log factor.
    ScaledBlock normalized() const {
        const double m = vectors.size() ? vectors.cwiseAbs().maxCoeff() : 0.0;
        if (m == 0.0) return *this;
        return rescaled(log_scale + std::log(m));
    }

    ScaledBlock<Complex> to_complex() const
        requires std::is_same_v<Scalar, double>
    {
        return ScaledBlock<Complex>(vectors.template cast<Complex>(), log_scale, source_tau);
    }
};

/// Instrumented counts of propagated columns.
struct CostCounters {
    std::atomic<long long> expm_applications{0};
    std::atomic<long long> realtime_applications{0};

    void reset() {
        expm_applications = 0;
        realtime_applications = 0;
    }
};

enum class PropagationMode { spectral, lanczos };

/// How e^{-tau H} and e^{-i H t} are applied: through a full spectral
/// decomposition, or column by column through a Krylov expansion.
///
/// Spectral mode shifts energies by the exact ground energy; Lanczos mode by
/// the smallest Ritz value of the first column's Krylov space. The shift is
/// carried in ScaledBlock::log_scale and cancels in every expectation value.
class PropagatorPlan {
  public:
    static PropagatorPlan spectral(std::shared_ptr<const SpectralDecomposition> spec) {
        if (!spec) throw InvalidArgument("PropagatorPlan::spectral: null decomposition");
        PropagatorPlan p;
        p.config_ = SpectralConfig{std::move(spec)};
        return p;
    }

    static PropagatorPlan lanczos(std::shared_ptr<const OperatorMatrix> h, LanczosOptions opts = {}) {
        if (!h) throw InvalidArgument("PropagatorPlan::lanczos: null operator");
        if (opts.max_krylov_dim < 1) throw InvalidArgument("PropagatorPlan::lanczos: max_krylov_dim < 1");
        PropagatorPlan p;
        p.config_ = LanczosConfig{std::move(h), opts};
        return p;
    }

    PropagationMode mode() const {
        return std::holds_alternative<SpectralConfig>(config_) ? PropagationMode::spectral
                                                               : PropagationMode::lanczos;
    }

    Index dim() const {
        if (auto *s = std::get_if<SpectralConfig>(&config_)) return s->spec->dim();
        return std::get<LanczosConfig>(config_).h->dim();
    }

    const SpectralDecomposition &spectrum() const {
        if (auto *s = std::get_if<SpectralConfig>(&config_)) return *s->spec;
        throw InvalidArgument("PropagatorPlan: spectrum requested from a Lanczos plan");
    }

    const LanczosOptions &lanczos_options() const { return std::get<LanczosConfig>(config_).opts; }

    CostCounters &counters() const { return *counters_; }

    /// Same propagation with its own counters; the operator data stays shared.
    PropagatorPlan with_fresh_counters() const {
        PropagatorPlan p = *this;
        p.counters_ = std::make_shared<CostCounters>();
        return p;
    }

    /// Represents e^{-tau H} applied to the input block.
    ScaledBlock<double> imag_time_apply(double tau, const ScaledBlock<double> &block) const {
        check(block.rows(), "imag_time_apply");
        if (!std::isfinite(tau) || tau < 0.0) {
            throw InvalidArgument("imag_time_apply: tau must be finite and >= 0");
        }
        counters_->expm_applications += block.cols();
        return imag_step(tau, block);
    }

    /// Evaluates the block at every (ascending) imaginary time in `taus` by
    /// chaining increments along one trajectory. Each column counts as one
    /// exponential application however many checkpoints are requested.
    std::vector<ScaledBlock<double>> imag_time_trajectory(std::span<const double> taus,
                                                          const ScaledBlock<double> &block) const {
        check(block.rows(), "imag_time_trajectory");
        std::vector<ScaledBlock<double>> out;
        out.reserve(taus.size());
        double current_tau = 0.0;
        ScaledBlock<double> current = block;
        bool moved = false;
        for (double tau : taus) {
            if (!std::isfinite(tau) || tau < current_tau) {
                throw InvalidArgument("imag_time_trajectory: taus must be finite, >= 0 and ascending");
            }
            if (tau > current_tau) {
                current = imag_step(tau - current_tau, current);
                current_tau = tau;
                moved = true;
            }
            out.push_back(current);
        }
        if (moved) counters_->expm_applications += block.cols();
        return out;
    }

    /// Represents e^{-i H t} applied to the input block; log_scale unchanged.
    ScaledBlock<Complex> real_time_apply(double t, const ScaledBlock<Complex> &block) const {
        check(block.rows(), "real_time_apply");
        if (!std::isfinite(t)) throw InvalidArgument("real_time_apply: t must be finite");
        counters_->realtime_applications += block.cols();
        if (t == 0.0) return block;
        ScaledBlock<Complex> out(ComplexBlock(block.rows(), block.cols()), block.log_scale, block.source_tau);
        if (auto *s = std::get_if<SpectralConfig>(&config_)) {
            const SpectralDecomposition &spec = *s->spec;
            const Vector<Complex> phase =
                (spec.eigenvalues.cast<Complex>() * Complex(0.0, -t)).array().exp().matrix();
            if (spec.diagonal_frame()) {
                out.vectors = phase.asDiagonal() * block.vectors;
            } else {
                // real eigenvectors: rotate real and imaginary parts separately
                const RealBlock &v = spec.eigenvectors;
                ComplexBlock coeffs(block.rows(), block.cols());
                coeffs.real() = v.transpose() * block.vectors.real();
                coeffs.imag() = v.transpose() * block.vectors.imag();
                coeffs = phase.asDiagonal() * coeffs;
                out.vectors.real() = v * coeffs.real();
                out.vectors.imag() = v * coeffs.imag();
            }
            return out;
        }
        const auto &lc = std::get<LanczosConfig>(config_);
        const Complex coefficient(0.0, -t);
        for (Index j = 0; j < block.cols(); ++j) {
            KrylovExpansion<Complex> krylov(*lc.h, block.vectors.col(j), coefficient, lc.opts);
            require_converged(krylov, j);
            out.vectors.col(j) = krylov.evaluate(coefficient, 0.0);
        }
        return out;
    }

  private:
    struct SpectralConfig {
        std::shared_ptr<const SpectralDecomposition> spec;
    };
    struct LanczosConfig {
        std::shared_ptr<const OperatorMatrix> h;
        LanczosOptions opts;
    };

    PropagatorPlan() : counters_(std::make_shared<CostCounters>()) {}

    void check(Index rows, const char *where) const {
        if (rows != dim()) throw DimensionMismatch(where, dim(), rows);
    }

    template <BlockScalar Scalar>
    static void require_converged(const KrylovExpansion<Scalar> &krylov, Index column) {
        if (!krylov.converged()) {
            throw ConvergenceFailure("Lanczos propagation did not converge for column " +
                                         std::to_string(column) + " within " +
                                         std::to_string(krylov.krylov_dim()) +
                                         " Krylov vectors (residual estimate " +
                                         std::to_string(krylov.residual_estimate()) + ")",
                                     krylov.residual_estimate());
        }
    }

    ScaledBlock<double> imag_step(double tau, const ScaledBlock<double> &block) const {
        if (tau == 0.0) return block;
        if (auto *s = std::get_if<SpectralConfig>(&config_)) {
            const SpectralDecomposition &spec = *s->spec;
            const double e0 = spec.ground_energy();
            const RealVector decay = (-tau * (spec.eigenvalues.array() - e0)).exp().matrix();
            RealBlock v;
            if (spec.diagonal_frame()) {
                v = decay.asDiagonal() * block.vectors;
            } else {
                const RealBlock coeffs = decay.asDiagonal() * (spec.eigenvectors.transpose() * block.vectors);
                v = spec.eigenvectors * coeffs;
            }
            return ScaledBlock<double>(std::move(v), block.log_scale - tau * e0, block.source_tau + tau);
        }
        const auto &lc = std::get<LanczosConfig>(config_);
        const Complex coefficient(-tau, 0.0);
        RealBlock v(block.rows(), block.cols());
        double shift = 0.0;
        for (Index j = 0; j < block.cols(); ++j) {
            KrylovExpansion<double> krylov(*lc.h, block.vectors.col(j), coefficient, lc.opts);
            require_converged(krylov, j);
            if (j == 0) shift = krylov.min_ritz_value();
            v.col(j) = krylov.evaluate(coefficient, shift);
        }
        return ScaledBlock<double>(std::move(v), block.log_scale - tau * shift, block.source_tau + tau);
    }

    std::variant<SpectralConfig, LanczosConfig> config_;
    std::shared_ptr<CostCounters> counters_;
};

}  // namespace lrqt
