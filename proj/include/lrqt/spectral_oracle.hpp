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

#include <lapacke.h>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "lrqt/lattice_model.hpp"
#include "lrqt/types.hpp"

namespace lrqt {

inline constexpr Index kDenseDiagonalizationCap = 8192;

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
///
/// An empty eigenvector matrix means the operator is already diagonal in the
/// working basis (eigenvectors = identity). That form is used when a problem
/// is rotated into the Hamiltonian's eigenbasis.
struct SpectralDecomposition {
    RealVector eigenvalues;
    RealBlock eigenvectors;

    Index dim() const { return eigenvalues.size(); }
    double ground_energy() const { return eigenvalues[0]; }
    bool diagonal_frame() const { return eigenvectors.size() == 0; }
};

inline SpectralDecomposition full_diagonalize(const OperatorMatrix &op,
                                              Index cap = kDenseDiagonalizationCap) {
    const Index n = op.dim();
    if (n > cap) {
        throw CapacityExceeded("full_diagonalize: dimension " + std::to_string(n) +
                               " exceeds the dense cap " + std::to_string(cap));
    }
    SpectralDecomposition out;
    out.eigenvectors = op.to_dense();
    out.eigenvalues.resize(n);
    if (n == 0) return out;
    const lapack_int info =
        LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(n),
                       out.eigenvectors.data(), static_cast<lapack_int>(n), out.eigenvalues.data());
    if (info != 0) {
        throw Error("full_diagonalize: LAPACK dsyevd failed with info=" + std::to_string(info));
    }
    return out;
}

/// Decomposition of diag(energies) in its own eigenbasis.
inline SpectralDecomposition eigenbasis_spectrum(const RealVector &energies) {
    SpectralDecomposition out;
    out.eigenvalues = energies;
    for (Index i = 1; i < energies.size(); ++i) {
        if (energies[i] < energies[i - 1]) {
            throw InvalidArgument("eigenbasis_spectrum: energies must be ascending");
        }
    }
    return out;
}

/// A positive scalar carried as its logarithm.
struct LogScalar {
    double log_value = 0.0;
    double value() const { return std::exp(log_value); }
};

/// e^{-beta (E_k - E_0)} for every level.
inline RealVector boltzmann_weights(const SpectralDecomposition &spec, double beta) {
    return (-beta * (spec.eigenvalues.array() - spec.ground_energy())).exp().matrix();
}

/// log Z = log sum_k e^{-beta (E_k - E_0)} - beta E_0.
inline LogScalar exact_partition(const SpectralDecomposition &spec, double beta) {
    return {std::log(boltzmann_weights(spec, beta).sum()) - beta * spec.ground_energy()};
}

/// <v_k|O|v_k> for every eigenvector.
inline RealVector observable_diagonal(const SpectralDecomposition &spec, const OperatorMatrix &obs) {
    if (obs.dim() != spec.dim()) throw DimensionMismatch("observable_diagonal", spec.dim(), obs.dim());
    if (spec.diagonal_frame()) return obs.diagonal_entries();
    const RealBlock ov = obs.apply<double>(spec.eigenvectors);
    return spec.eigenvectors.cwiseProduct(ov).colwise().sum().transpose();
}

inline double thermal_average(const SpectralDecomposition &spec, const RealVector &obs_diagonal,
                              double beta) {
    const RealVector w = boltzmann_weights(spec, beta);
    return w.dot(obs_diagonal) / w.sum();
}

inline double exact_thermal_expectation(const SpectralDecomposition &spec, const OperatorMatrix &obs,
                                        double beta) {
    return thermal_average(spec, observable_diagonal(spec, obs), beta);
}

/// Exact <O(t)> after a quench H0 -> H1 from the Gibbs state of H0.
///
/// Works in the eigenbasis of H1: with rho = Gibbs state of H0 and O both
/// rotated there, <O(t)> = sum_ab rho_ab O_ab cos((E_a - E_b) t) / Z. The
/// Hadamard product is formed once so each time point costs O(dim^2).
class QuenchOracle {
  public:
    QuenchOracle(const SpectralDecomposition &spec_init, const SpectralDecomposition &spec_final,
                 const OperatorMatrix &obs, double beta)
        : energies_(spec_final.eigenvalues) {
        const Index n = spec_init.dim();
        if (spec_final.dim() != n) throw DimensionMismatch("QuenchOracle", n, spec_final.dim());
        if (obs.dim() != n) throw DimensionMismatch("QuenchOracle", n, obs.dim());
        if (spec_init.diagonal_frame() || spec_final.diagonal_frame()) {
            throw InvalidArgument("QuenchOracle: decompositions must carry eigenvectors");
        }
        const RealVector w = boltzmann_weights(spec_init, beta);
        // overlap(a, k) = <a_final | k_init>
        const RealBlock overlap = spec_final.eigenvectors.transpose() * spec_init.eigenvectors;
        const RealBlock weighted = overlap * w.asDiagonal();
        RealBlock rho = weighted * overlap.transpose();
        rho /= w.sum();
        const RealBlock obs_final =
            spec_final.eigenvectors.transpose() * obs.apply<double>(spec_final.eigenvectors);
        hadamard_ = rho.cwiseProduct(obs_final);
    }

    double operator()(double t) const {
        const RealVector c = (energies_ * t).array().cos().matrix();
        const RealVector s = (energies_ * t).array().sin().matrix();
        return c.dot(hadamard_ * c) + s.dot(hadamard_ * s);
    }

    std::vector<double> series(std::span<const double> times) const {
        std::vector<double> out;
        out.reserve(times.size());
        for (double t : times) out.push_back((*this)(t));
        return out;
    }

  private:
    RealVector energies_;
    RealBlock hadamard_;
};

inline double exact_quench_expectation(const SpectralDecomposition &spec_init,
                                       const SpectralDecomposition &spec_final,
                                       const OperatorMatrix &obs, double beta, double t) {
    return QuenchOracle(spec_init, spec_final, obs, beta)(t);
}

/// |Z - Z_r| / Z where Z_r keeps only the r lowest energies.
inline double truncated_trace_error(const SpectralDecomposition &spec, double beta, Index r) {
    if (r < 1 || r > spec.dim()) {
        throw InvalidArgument("truncated_trace_error: r=" + std::to_string(r) + " outside [1, " +
                              std::to_string(spec.dim()) + "]");
    }
    const RealVector w = boltzmann_weights(spec, beta);
    // accumulate from the top so the dropped mass is monotone in r
    double dropped = 0.0;
    for (Index k = spec.dim() - 1; k >= r; --k) dropped += w[k];
    return dropped / w.sum();
}

}  // namespace lrqt
