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

// Nearest-neighbour spin correlation of a 12-site Heisenberg ring against
// temperature: the exact curve next to ensemble means of LTQT (M = 3r) and
// LR-LTQT (rank r), at the same number of exponential applications.
//
//   thermal_curve [L] [r] [realizations]

#include <cstdio>
#include <cstdlib>
#include <memory>

#include "lrqt/blas_guard.hpp"
#include "lrqt/ensemble_stats.hpp"
#include "lrqt/estimators.hpp"
#include "lrqt/lattice_model.hpp"
#include "lrqt/spectral_oracle.hpp"

int main(int argc, char **argv) {
    lrqt::ensure_sound_blas(argv);
    const int L = argc > 1 ? std::atoi(argv[1]) : 12;
    const lrqt::Index r = argc > 2 ? std::atol(argv[2]) : 10;
    const std::uint64_t n = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 100;

    const auto basis = lrqt::build_sector_basis(L, 0.0);
    const auto h = lrqt::build_xxz_hamiltonian(basis, 0.0);
    const auto c = lrqt::build_nn_correlator(basis);
    auto spec = std::make_shared<const lrqt::SpectralDecomposition>(lrqt::full_diagonalize(h));
    const auto plan = lrqt::PropagatorPlan::spectral(spec);

    std::printf("# L=%d dim=%lld r=%lld M=%lld realizations=%llu\n", L, static_cast<long long>(basis.dim()),
                static_cast<long long>(r), static_cast<long long>(3 * r), static_cast<unsigned long long>(n));
    std::printf("%8s %12s %12s %10s %12s %10s\n", "T", "exact", "LTQT", "stderr", "LR-LTQT", "stderr");
    for (double t : {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0}) {
        const double beta = 1.0 / t;
        const auto qt = lrqt::run_ensemble(
            [&](std::uint64_t seed, std::uint64_t k) {
                return lrqt::qt_expectation(lrqt::EstimatorKind::LTQT, plan, c, beta, 3 * r, seed, k).value;
            },
            n, /*seed=*/7);
        const auto lr = lrqt::run_ensemble(
            [&](std::uint64_t seed, std::uint64_t k) {
                return lrqt::lrqt_expectation(lrqt::EstimatorKind::LR_LTQT, plan, c, beta, r, seed, k).value;
            },
            n, /*seed=*/7);
        std::printf("%8.3f %12.6f %12.6f %10.2e %12.6f %10.2e\n", t, lrqt::exact_thermal_expectation(*spec, c, beta),
                    qt.stats[0].mean, qt.stats[0].std_error, lr.stats[0].mean, lr.stats[0].std_error);
    }
    return 0;
}
