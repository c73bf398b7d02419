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

#include "lrqt/propagator.hpp"

#include <gtest/gtest.h>

#include "lrqt/randrange.hpp"
#include "oracles.hpp"

using namespace lrqt;

namespace {

constexpr int kL = 8;

struct Fixture {
    SectorBasis basis = build_sector_basis(kL, 0.0);
    std::shared_ptr<const OperatorMatrix> h =
        std::make_shared<const OperatorMatrix>(build_xxz_hamiltonian(basis, 0.5));
    std::shared_ptr<const SpectralDecomposition> spec =
        std::make_shared<const SpectralDecomposition>(full_diagonalize(*h));
    oracle::Mat dense = oracle::sector_xxz(kL, 0.5);
    RealBlock block = sample_gaussian_block(basis.dim(), 3, 11, 0).vectors;
};

double rel_diff(const RealBlock &a, const RealBlock &b) { return (a - b).norm() / b.norm(); }
double rel_diff(const ComplexBlock &a, const ComplexBlock &b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST(Propagator, spectral_imaginary_time_matches_expm) {
    Fixture f;
    const auto plan = PropagatorPlan::spectral(f.spec);
    for (double tau : {0.0, 0.25, 2.0, 8.0}) {
        const ScaledBlock<double> out = plan.imag_time_apply(tau, ScaledBlock<double>(f.block));
        const RealBlock ref = oracle::expm(-tau * f.dense) * f.block;
        EXPECT_LT(rel_diff(out.represented(), ref), 1e-12) << "tau=" << tau;
    }
}

TEST(Propagator, lanczos_imaginary_time_matches_spectral) {
    Fixture f;
    const auto sp = PropagatorPlan::spectral(f.spec);
    const auto lz = PropagatorPlan::lanczos(f.h);
    for (double tau : {0.1, 1.0, 5.0}) {
        const auto a = sp.imag_time_apply(tau, ScaledBlock<double>(f.block));
        const auto b = lz.imag_time_apply(tau, ScaledBlock<double>(f.block));
        EXPECT_LT(rel_diff(b.represented(), a.represented()), 1e-10) << "tau=" << tau;
    }
}

TEST(Propagator, real_time_matches_expm_in_both_modes) {
    Fixture f;
    const auto sp = PropagatorPlan::spectral(f.spec);
    const auto lz = PropagatorPlan::lanczos(f.h);
    const ComplexBlock x = f.block.cast<Complex>();
    for (double t : {0.3, 2.0, 6.0}) {
        const oracle::CMat u = oracle::expm_complex(oracle::CMat(f.dense.cast<Complex>() * Complex(0.0, -t)));
        const ComplexBlock ref = u * x;
        EXPECT_LT(rel_diff(sp.real_time_apply(t, ScaledBlock<Complex>(x)).represented(), ref), 1e-12);
        EXPECT_LT(rel_diff(lz.real_time_apply(t, ScaledBlock<Complex>(x)).represented(), ref), 1e-10);
    }
}

TEST(Propagator, real_time_preserves_norm) {
    Fixture f;
    const auto sp = PropagatorPlan::spectral(f.spec);
    const ComplexBlock x = f.block.cast<Complex>();
    const auto out = sp.real_time_apply(4.0, ScaledBlock<Complex>(x));
    EXPECT_NEAR(out.vectors.norm(), x.norm(), 1e-12 * x.norm());
}

TEST(Propagator, zero_time_is_identity) {
    Fixture f;
    for (const auto &plan : {PropagatorPlan::spectral(f.spec), PropagatorPlan::lanczos(f.h)}) {
        const auto a = plan.imag_time_apply(0.0, ScaledBlock<double>(f.block));
        EXPECT_EQ(a.vectors, f.block);
        EXPECT_EQ(a.log_scale, 0.0);
        const ComplexBlock x = f.block.cast<Complex>();
        EXPECT_EQ(plan.real_time_apply(0.0, ScaledBlock<Complex>(x)).vectors, x);
    }
}

TEST(Propagator, log_scale_keeps_large_beta_finite) {
    Fixture f;
    const auto plan = PropagatorPlan::spectral(f.spec);
    const auto out = plan.imag_time_apply(2000.0, ScaledBlock<double>(f.block));
    EXPECT_TRUE(out.vectors.allFinite());
    EXPECT_GT(out.vectors.norm(), 0.0);
    EXPECT_NEAR(out.log_scale, -2000.0 * f.spec->ground_energy(), 1e-9);
}

TEST(Propagator, trajectory_matches_direct_application) {
    Fixture f;
    const auto plan = PropagatorPlan::spectral(f.spec);
    const std::vector<double> taus{0.0, 0.5, 1.25, 3.0};
    const auto traj = plan.imag_time_trajectory(taus, ScaledBlock<double>(f.block));
    ASSERT_EQ(traj.size(), taus.size());
    for (std::size_t i = 0; i < taus.size(); ++i) {
        const auto direct = plan.imag_time_apply(taus[i], ScaledBlock<double>(f.block));
        EXPECT_LT(rel_diff(traj[i].represented(), direct.represented()), 1e-12);
    }
    const std::vector<double> bad{1.0, 0.5};
    EXPECT_THROW(plan.imag_time_trajectory(bad, ScaledBlock<double>(f.block)), InvalidArgument);
}

TEST(Propagator, counters_count_columns) {
    Fixture f;
    const auto plan = PropagatorPlan::spectral(f.spec);
    plan.imag_time_apply(1.0, ScaledBlock<double>(f.block));
    EXPECT_EQ(plan.counters().expm_applications, 3);
    const std::vector<double> taus{0.0, 1.0, 2.0, 3.0};
    plan.imag_time_trajectory(taus, ScaledBlock<double>(f.block));
    EXPECT_EQ(plan.counters().expm_applications, 6);
    plan.real_time_apply(1.0, ScaledBlock<Complex>(ComplexBlock(f.block.cast<Complex>())));
    EXPECT_EQ(plan.counters().realtime_applications, 3);
    // copies share the counters
    const PropagatorPlan copy = plan;
    copy.imag_time_apply(1.0, ScaledBlock<double>(f.block));
    EXPECT_EQ(plan.counters().expm_applications, 9);
    plan.counters().reset();
    EXPECT_EQ(copy.counters().expm_applications, 0);
}

TEST(Propagator, lanczos_reports_nonconvergence) {
    Fixture f;
    LanczosOptions opts;
    opts.max_krylov_dim = 3;
    const auto plan = PropagatorPlan::lanczos(f.h, opts);
    EXPECT_THROW(plan.imag_time_apply(5.0, ScaledBlock<double>(f.block)), ConvergenceFailure);
}

TEST(Propagator, rejects_bad_arguments) {
    Fixture f;
    const auto plan = PropagatorPlan::spectral(f.spec);
    EXPECT_THROW(plan.imag_time_apply(-1.0, ScaledBlock<double>(f.block)), InvalidArgument);
    EXPECT_THROW(plan.imag_time_apply(std::nan(""), ScaledBlock<double>(f.block)), InvalidArgument);
    EXPECT_THROW(plan.imag_time_apply(1.0, ScaledBlock<double>(RealBlock(RealBlock::Zero(5, 1)))),
                 DimensionMismatch);
    EXPECT_THROW(PropagatorPlan::spectral(nullptr), InvalidArgument);
    EXPECT_THROW(plan.lanczos_options(), std::bad_variant_access);
}

TEST(Propagator, diagonal_frame_matches_rotated_frame) {
    Fixture f;
    const auto full = PropagatorPlan::spectral(f.spec);
    const auto diag = PropagatorPlan::spectral(
        std::make_shared<const SpectralDecomposition>(eigenbasis_spectrum(f.spec->eigenvalues)));
    const RealBlock &v = f.spec->eigenvectors;
    const auto a = full.imag_time_apply(1.3, ScaledBlock<double>(f.block));
    const auto b = diag.imag_time_apply(1.3, ScaledBlock<double>(RealBlock(v.transpose() * f.block)));
    EXPECT_LT(rel_diff(RealBlock(v * b.represented()), a.represented()), 1e-12);
}
