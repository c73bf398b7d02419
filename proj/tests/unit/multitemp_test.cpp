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

#include "lrqt/multitemp.hpp"

#include <gtest/gtest.h>

using namespace lrqt;

namespace {

struct Fixture {
    SectorBasis basis = build_sector_basis(10, 0.0);
    std::shared_ptr<const OperatorMatrix> h =
        std::make_shared<const OperatorMatrix>(build_xxz_hamiltonian(basis, 0.0));
    OperatorMatrix c = build_nn_correlator(basis);
    PropagatorPlan plan =
        PropagatorPlan::spectral(std::make_shared<const SpectralDecomposition>(full_diagonalize(*h)));
};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(RequiredTaus, cover_every_checkpoint) {
    const std::vector<double> betas{1.0, 2.0};
    EXPECT_EQ(required_taus(EstimatorKind::LR_LTQT, betas), (std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0, 3.0}));
    EXPECT_EQ(required_taus(EstimatorKind::LR_HTQT, betas), (std::vector<double>{0.0, 1.0, 2.0, 4.0}));
    EXPECT_EQ(required_tau_max(EstimatorKind::LR_LTQT, 2.0), 3.0);
    EXPECT_EQ(required_tau_max(EstimatorKind::LR_HTQT, 2.0), 4.0);
    EXPECT_THROW(required_taus(EstimatorKind::LTQT, betas), InvalidArgument);
}

TEST(SweepLrqt, matches_direct_estimates) {
    Fixture f;
    const std::vector<double> betas{0.5, 1.0, 2.0};
    for (auto kind : {EstimatorKind::LR_LTQT, EstimatorKind::LR_HTQT}) {
        const auto sweep = sweep_lrqt({betas, kind, 20}, f.plan, f.c, 17, 4);
        ASSERT_EQ(sweep.size(), betas.size());
        for (std::size_t i = 0; i < betas.size(); ++i) {
            const auto direct = lrqt_expectation(kind, f.plan, f.c, betas[i], 20, 17, 4);
            EXPECT_LT(rel(sweep[i].value, direct.value), 1e-10);
            EXPECT_LT(rel(sweep[i].partition.value(), direct.partition.value()), 1e-10);
        }
    }
}

TEST(SweepLrqt, cholesky_path_matches_qr_path) {
    Fixture f;
    const std::vector<double> betas{0.5, 1.0};
    SweepOptions opts;
    opts.orthogonalization = Orthogonalization::cholesky;
    const auto a = sweep_lrqt({betas, EstimatorKind::LR_LTQT, 10}, f.plan, f.c, 2, 0);
    const auto b = sweep_lrqt({betas, EstimatorKind::LR_LTQT, 10}, f.plan, f.c, 2, 0, opts);
    for (std::size_t i = 0; i < betas.size(); ++i) EXPECT_LT(rel(a[i].value, b[i].value), 1e-10);
}

TEST(SweepLrqt, costs_one_trajectory_per_block) {
    Fixture f;
    std::vector<double> betas;
    for (int i = 1; i <= 12; ++i) betas.push_back(0.25 * i);
    f.plan.counters().reset();
    sweep_lrqt({betas, EstimatorKind::LR_LTQT, 8}, f.plan, f.c, 1, 0);
    // Y and G each travel along one trajectory, whatever the grid size
    EXPECT_EQ(f.plan.counters().expm_applications, 16);
}

TEST(CachedEvolution, evolved_blocks_match_direct_evolution) {
    Fixture f;
    const Index r = 6;
    const auto s = sample_gaussian_block(f.basis.dim(), r, 3, stream_id(0, StreamRole::range_sketch));
    const auto g = sample_gaussian_block(f.basis.dim(), r, 3, stream_id(0, StreamRole::complement));
    const std::vector<double> betas{1.0};
    const CachedEvolution cache = build_cache(f.plan, s, g, required_taus(EstimatorKind::LR_LTQT, betas));
    EXPECT_EQ(cache.rank(), r);
    EXPECT_EQ(cache.tau_max(), 1.5);
    EXPECT_EQ(cache.realization(), 0u);
    const RangeBasis basis = cached_basis(cache, 1.0);
    const auto eq = evolved_q(cache, basis, 0.5);
    const auto direct_q = f.plan.imag_time_apply(0.5, ScaledBlock<double>(basis.q_block));
    EXPECT_LT((eq.represented() - direct_q.represented()).norm() / direct_q.represented().norm(), 1e-10);
    const auto eg = evolved_g_tilde(cache, basis, 0.5);
    const auto direct_g = f.plan.imag_time_apply(0.5, ScaledBlock<double>(project_complement(basis, g)));
    EXPECT_LT((eg.represented() - direct_g.represented()).norm() / direct_g.represented().norm(), 1e-10);
    EXPECT_THROW(cache.y(0.7), InvalidArgument);
    EXPECT_FALSE(cache.contains(2.0));
}

TEST(CachedEvolution, refuses_ill_conditioned_r) {
    Fixture f;
    // at very low temperature every sketch column collapses onto the ground state
    const std::vector<double> betas{200.0};
    const auto s = sample_gaussian_block(f.basis.dim(), 6, 3, 1);
    const auto g = sample_gaussian_block(f.basis.dim(), 6, 3, 2);
    const CachedEvolution cache = build_cache(f.plan, s, g, required_taus(EstimatorKind::LR_LTQT, betas));
    RangeBasis basis = orthogonalize_qr(cache.y(200.0).vectors, 0.0);
    basis.source_beta = 200.0;
    basis.log_scale = cache.y(200.0).log_scale;
    EXPECT_THROW(evolved_q(cache, basis, 100.0), IllConditioned);
}

TEST(SweepLrqt, rejects_bad_grids) {
    Fixture f;
    EXPECT_THROW(sweep_lrqt({{}, EstimatorKind::LR_LTQT, 4}, f.plan, f.c, 1, 0), InvalidArgument);
    EXPECT_THROW(sweep_lrqt({{2.0, 1.0}, EstimatorKind::LR_LTQT, 4}, f.plan, f.c, 1, 0), InvalidArgument);
    EXPECT_THROW(sweep_lrqt({{1.0}, EstimatorKind::LTQT, 4}, f.plan, f.c, 1, 0), InvalidArgument);
    EXPECT_THROW(sweep_lrqt({{0.0, 1.0}, EstimatorKind::LR_LTQT, 4}, f.plan, f.c, 1, 0), InvalidArgument);
}
