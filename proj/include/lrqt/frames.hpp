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

#include <memory>

#include "lrqt/lattice_model.hpp"
#include "lrqt/propagator.hpp"
#include "lrqt/spectral_oracle.hpp"

namespace lrqt {

// Traces are basis independent and a standard-normal block stays standard
// normal under any orthogonal change of basis. A problem can therefore be
// posed in the eigenbasis of its Hamiltonian, where e^{-tau H} is a diagonal
// scaling, without changing the distribution of any estimator.

/// V^T O V, symmetrized.
inline RealBlock rotate_operator(const RealBlock &v, const OperatorMatrix &obs) {
    if (obs.dim() != v.rows()) throw DimensionMismatch("rotate_operator", v.rows(), obs.dim());
    RealBlock out = v.transpose() * obs.apply<double>(v);
    return 0.5 * (out + out.transpose());
}

/// A static problem in the eigenbasis of H.
struct EigenbasisFrame {
    std::shared_ptr<const SpectralDecomposition> spectrum;  // diagonal form
    PropagatorPlan plan;
    std::shared_ptr<const OperatorMatrix> observable;       // V^T O V
};

inline EigenbasisFrame make_eigenbasis_frame(const SpectralDecomposition &config_spectrum, const OperatorMatrix &obs) {
    if (config_spectrum.diagonal_frame()) throw InvalidArgument("make_eigenbasis_frame: need eigenvectors");
    auto spec = std::make_shared<const SpectralDecomposition>(eigenbasis_spectrum(config_spectrum.eigenvalues));
    auto o = std::make_shared<const OperatorMatrix>(
        OperatorMatrix::from_dense(rotate_operator(config_spectrum.eigenvectors, obs)));
    return EigenbasisFrame{spec, PropagatorPlan::spectral(spec), o};
}

/// Copy sharing all operator data but counting applications separately.
inline EigenbasisFrame with_fresh_counters(const EigenbasisFrame &f) {
    return EigenbasisFrame{f.spectrum, f.plan.with_fresh_counters(), f.observable};
}

/// A quench problem expressed in the eigenbasis of the initial Hamiltonian.
///
/// plan_final acts with eigenvectors V0^T V1; observable_final is O in the
/// eigenbasis of the final Hamiltonian, and to_final = V1^T V0 maps vectors
/// from the initial to the final eigenbasis.
struct QuenchFrame {
    std::shared_ptr<const SpectralDecomposition> init_spectrum;
    std::shared_ptr<const SpectralDecomposition> final_spectrum;
    PropagatorPlan plan_init;
    PropagatorPlan plan_final;
    std::shared_ptr<const OperatorMatrix> observable;
    std::shared_ptr<const RealBlock> observable_final;

    /// V1^T V0, the transpose of final_spectrum's eigenvectors.
    auto to_final() const { return final_spectrum->eigenvectors.transpose(); }
};

inline QuenchFrame make_quench_frame(const SpectralDecomposition &spec_init, const SpectralDecomposition &spec_final,
                                     const OperatorMatrix &obs) {
    if (spec_init.diagonal_frame() || spec_final.diagonal_frame()) {
        throw InvalidArgument("make_quench_frame: need eigenvectors");
    }
    if (spec_init.dim() != spec_final.dim()) throw DimensionMismatch("make_quench_frame", spec_init.dim(), spec_final.dim());
    auto init = std::make_shared<const SpectralDecomposition>(eigenbasis_spectrum(spec_init.eigenvalues));
    auto fin = std::make_shared<SpectralDecomposition>();
    fin->eigenvalues = spec_final.eigenvalues;
    fin->eigenvectors = spec_init.eigenvectors.transpose() * spec_final.eigenvectors;
    std::shared_ptr<const SpectralDecomposition> fin_c = fin;
    auto o = std::make_shared<const OperatorMatrix>(OperatorMatrix::from_dense(rotate_operator(spec_init.eigenvectors, obs)));
    auto o_final = std::make_shared<const RealBlock>(rotate_operator(spec_final.eigenvectors, obs));
    return QuenchFrame{init, fin_c, PropagatorPlan::spectral(init), PropagatorPlan::spectral(fin_c), o, o_final};
}

inline QuenchFrame with_fresh_counters(const QuenchFrame &f) {
    QuenchFrame out = f;
    out.plan_init = f.plan_init.with_fresh_counters();
    out.plan_final = f.plan_final.with_fresh_counters();
    return out;
}

}  // namespace lrqt
