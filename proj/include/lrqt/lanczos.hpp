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
#include <limits>
#include <vector>

#include "lrqt/lattice_model.hpp"
#include "lrqt/types.hpp"

namespace lrqt {

struct LanczosOptions {
    int max_krylov_dim = 64;
    double residual_tol = 1e-10;
    bool reorthogonalize = true;
};

/// Krylov space of one starting vector under a Hermitian operator.
///
/// Grows the Lanczos recursion until exp(coefficient * T_k) e_1 converges,
/// where T_k is the k x k tridiagonal projection. The relative residual is
/// estimated by beta_k |[exp(c T_k) e_1]_k| / ||exp(c T_k) e_1||, which does
/// not depend on any scalar energy shift.
template <BlockScalar Scalar>
class KrylovExpansion {
  public:
    KrylovExpansion(const OperatorMatrix &h, const Vector<Scalar> &start, Complex coefficient,
                    const LanczosOptions &opts)
        : norm_(start.norm()) {
        const Index n = start.size();
        if (norm_ == 0.0) {
            converged_ = true;
            return;
        }
        basis_.resize(n, std::min<Index>(opts.max_krylov_dim, n) + 1);
        basis_.col(0) = start / norm_;
        const double hscale = std::max(1.0, h.is_sparse() ? h.sparse().coeffs().cwiseAbs().sum() / n
                                                          : h.dense().cwiseAbs().rowwise().sum().maxCoeff());
        const Index kmax = std::min<Index>(opts.max_krylov_dim, n);
        for (Index k = 0; k < kmax; ++k) {
            Vector<Scalar> w = h.apply<Scalar>(Block<Scalar>(basis_.col(k)));
            const double a = std::real(basis_.col(k).dot(w));
            alpha_.push_back(a);
            w -= a * basis_.col(k);
            if (k > 0) w -= beta_.back() * basis_.col(k - 1);
            if (opts.reorthogonalize) {
                for (int pass = 0; pass < 2; ++pass) {
                    const auto prev = basis_.leftCols(k + 1);
                    w -= prev * (prev.adjoint() * w);
                }
            }
            const double b = w.norm();
            const Index m = k + 1;
            residual_ = estimate_residual(coefficient, b);
            if (b <= 1e-13 * hscale) {
                // invariant subspace: the projection is exact
                residual_ = 0.0;
                converged_ = true;
                break;
            }
            if (residual_ <= opts.residual_tol) {
                converged_ = true;
                break;
            }
            if (m == kmax) break;
            beta_.push_back(b);
            basis_.col(m) = w / b;
        }
    }

    bool converged() const { return converged_; }
    double residual_estimate() const { return residual_; }
    Index krylov_dim() const { return static_cast<Index>(alpha_.size()); }

    /// Smallest Ritz value of the final Krylov space.
    double min_ritz_value() const {
        if (alpha_.empty()) return 0.0;
        return ritz().eigenvalues()[0];
    }

    /// ||start|| * V_k exp(coefficient * (T_k - shift)) e_1.
    Vector<Scalar> evaluate(Complex coefficient, double shift) const {
        const Index n = basis_.rows();
        if (alpha_.empty()) return Vector<Scalar>::Zero(n == 0 ? 0 : n);
        const Vector<Complex> small = small_exp(coefficient, shift);
        const Index m = krylov_dim();
        if constexpr (std::is_same_v<Scalar, double>) {
            return norm_ * (basis_.leftCols(m) * small.real());
        } else {
            return norm_ * (basis_.leftCols(m) * small);
        }
    }

  private:
    Eigen::SelfAdjointEigenSolver<RealBlock> ritz() const {
        const Index m = static_cast<Index>(alpha_.size());
        RealVector diag = Eigen::Map<const RealVector>(alpha_.data(), m);
        RealVector sub = m > 1 ? RealVector(Eigen::Map<const RealVector>(beta_.data(), m - 1)) : RealVector();
        Eigen::SelfAdjointEigenSolver<RealBlock> es;
        es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
        return es;
    }

    Vector<Complex> small_exp(Complex coefficient, double shift) const {
        const auto es = ritz();
        const RealVector &theta = es.eigenvalues();
        const RealBlock &u = es.eigenvectors();
        Vector<Complex> phase(theta.size());
        for (Index i = 0; i < theta.size(); ++i) phase[i] = std::exp(coefficient * (theta[i] - shift)) * u(0, i);
        return u.cast<Complex>() * phase;
    }

    double estimate_residual(Complex coefficient, double next_beta) const {
        const Index m = static_cast<Index>(alpha_.size());
        const double shift = ritz().eigenvalues()[0];
        const Vector<Complex> small = small_exp(coefficient, shift);
        const double scale = small.norm();
        if (scale == 0.0) return 0.0;
        return next_beta * std::abs(small[m - 1]) / scale;
    }

    double norm_;
    Block<Scalar> basis_;
    std::vector<double> alpha_;
    std::vector<double> beta_;
    double residual_ = std::numeric_limits<double>::infinity();
    bool converged_ = false;
};

}  // namespace lrqt
