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

#include <unistd.h>

#include <cstdlib>
#include <cstring>
#include <string>

#include "lrqt/spectral_oracle.hpp"
#include "lrqt/types.hpp"

namespace lrqt {

/// Compares BLAS-backed products against Eigen's built-in kernel on shapes
/// large enough to leave the small-matrix path, and checks an eigensolver
/// residual. Returns the largest deviation.
inline double blas_product_deviation() {
    double worst = 0.0;
    for (Index cols : {40, 320}) {
        const RealBlock a = RealBlock::Random(320, 320);
        const RealBlock b = RealBlock::Random(320, cols);
        const RealBlock fast = a * b;
        const RealBlock reference = a.lazyProduct(b);
        worst = std::max(worst, (fast - reference).cwiseAbs().maxCoeff());
    }
    // the dense eigensolver goes through the same kernels
    RealBlock m = RealBlock::Random(320, 320);
    m = (m + m.transpose()).eval();
    const SpectralDecomposition spec = full_diagonalize(OperatorMatrix::from_dense(m));
    const RealBlock residual = m.lazyProduct(spec.eigenvectors) - spec.eigenvectors * spec.eigenvalues.asDiagonal();
    worst = std::max(worst, residual.cwiseAbs().maxCoeff());
    return worst;
}

inline bool blas_is_sound() { return blas_product_deviation() < 1e-9; }

/// Some dynamic-arch OpenBLAS builds select a kernel that miscomputes dgemm
/// on CPUs they misidentify. The kernel is chosen when the library loads, so
/// the only remedy from inside a process is to restart it with
/// OPENBLAS_CORETYPE set. Tries SkylakeX, then Haswell, then gives up.
inline void ensure_sound_blas(char **argv) {
    if (blas_is_sound()) return;
    const char *current = std::getenv("OPENBLAS_CORETYPE");
    const char *next = nullptr;
    if (current == nullptr) {
        next = "SkylakeX";
    } else if (std::strcmp(current, "SkylakeX") == 0) {
        next = "Haswell";
    }
    if (next == nullptr || argv == nullptr) {
        throw Error("BLAS self-check failed: matrix products deviate by " + std::to_string(blas_product_deviation()) +
                    (current ? std::string(" with OPENBLAS_CORETYPE=") + current : std::string()));
    }
    ::setenv("OPENBLAS_CORETYPE", next, 1);
    ::execv("/proc/self/exe", argv);
    throw Error("BLAS self-check failed and re-executing with OPENBLAS_CORETYPE=" + std::string(next) + " failed");
}

}  // namespace lrqt
