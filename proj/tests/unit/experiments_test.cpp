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

#include "lrqt/app/report.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"

using namespace lrqt;
using namespace lrqt::app;

namespace {

ExperimentConfig small(Command c, int L = 8) {
    ExperimentConfig cfg = default_config(c);
    cfg.model.L = L;
    cfg.ensemble.n_realizations = 6;
    cfg.ensemble.seed = 17;
    if (c == Command::static_sweep || c == Command::varsweep) {
        cfg.estimator.rank = 5;
        cfg.estimator.samples = 15;
        cfg.schedule.tpoints = 4;
    }
    if (c == Command::rsweep) cfg.schedule.ranks = {2, 4, 8};
    if (c == Command::quench) {
        cfg.estimator.rank = 6;
        cfg.estimator.samples = 18;
        cfg.schedule.t_max = 1.0;
        cfg.schedule.t_step = 0.25;
    }
    resolve(cfg);
    return cfg;
}

std::string first_line(const std::string &s) { return s.substr(0, s.find('\n')); }

std::size_t count_lines(const std::string &s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Report, headers_are_fixed) {
    EXPECT_EQ(first_line(run_experiment(small(Command::static_sweep)).csv), "T,kind,mean,variance,stderr,n,exact");
    EXPECT_EQ(first_line(run_experiment(small(Command::varsweep)).csv), "T,kind,mean,variance,stderr,n,exact");
    EXPECT_EQ(first_line(run_experiment(small(Command::rsweep)).csv), "r,kind,variance,stderr,n");
    EXPECT_EQ(first_line(run_experiment(small(Command::quench)).csv), "t,kind,mean,variance,exact");
    EXPECT_EQ(first_line(run_experiment(small(Command::traceerr)).csv), "r,beta,lr_err,trunc_err");
}

TEST(Report, sidecar_has_required_keys) {
    const auto out = run_experiment(small(Command::quench));
    for (const char *key : {"config_hash", "seed", "expm_applications", "realtime_applications", "wall_seconds"}) {
        EXPECT_TRUE(out.sidecar.contains(key)) << key;
    }
    EXPECT_EQ(out.sidecar["seed"].get<std::uint64_t>(), 17u);
    EXPECT_EQ(out.sidecar["config_hash"].get<std::string>(), config_hash(small(Command::quench)));
}

TEST(Report, numbers_round_trip) {
    for (double x : {0.1, -1.0 / 52.0, 1e-300, 123456789.125, 0.0}) {
        EXPECT_EQ(std::stod(fmt_number(x)), x);
    }
    EXPECT_EQ(fmt_number(0.1), "0.1");
}

TEST(Report, raw_values_cover_every_realization) {
    const auto cfg = small(Command::static_sweep);
    const auto out = run_experiment(cfg);
    EXPECT_EQ(first_line(out.raw_csv), "realization,T,kind,value");
    EXPECT_EQ(count_lines(out.raw_csv), 1 + 6u * 4u * 4u);
    // the summary mean is the mean of the raw column
    const auto &res = std::get<StaticResult>(out.result);
    double sum = 0.0;
    for (const auto &row : res.raw.values) sum += row[0];
    EXPECT_NEAR(res.rows[0].stats.mean, sum / 6.0, 1e-15);
}

TEST(StaticExperiment, exact_column_matches_dense_oracle) {
    const auto cfg = small(Command::static_sweep);
    const auto res = run_static(cfg);
    const auto h = oracle::sector_xxz(8, 0.0);
    const auto c = oracle::sector_correlator(8);
    ASSERT_EQ(res.rows.size(), 16u);
    for (const auto &row : res.rows) {
        EXPECT_NEAR(row.exact, oracle::thermal(h, c, 1.0 / row.temperature), 1e-12) << row.temperature;
    }
}

TEST(StaticExperiment, infinite_temperature_limit_of_exact_column) {
    // in the Sz = 0 sector of L sites, <Sz_i Sz_j> for i != j is -1 / (4 (L - 1))
    auto cfg = small(Command::static_sweep, 10);
    cfg.schedule.temperatures = {1e12};
    const auto res = run_static(cfg);
    EXPECT_NEAR(res.rows[0].exact, -1.0 / 36.0, 1e-10);
}

TEST(StaticExperiment, rows_match_the_estimators_on_the_same_streams) {
    const auto cfg = small(Command::static_sweep);
    const auto res = run_static(cfg);
    const auto model = model_data(cfg);
    const auto temps = cfg.temperature_grid();
    const PropagatorPlan plan = model->frame.plan.with_fresh_counters();
    for (std::size_t i = 0; i < cfg.estimator.kinds.size(); ++i) {
        const EstimatorKind kind = cfg.estimator.kinds[i];
        const double beta = 1.0 / temps[2];
        const auto e = estimate_expectation(kind, plan, *model->frame.observable, beta,
                                            is_low_rank(kind) ? cfg.estimator.rank : cfg.estimator.samples,
                                            cfg.ensemble.seed, 3);
        EXPECT_NEAR(res.raw.values[3][i * temps.size() + 2], e.value, 1e-12) << to_string(kind);
    }
}

TEST(StaticExperiment, counts_budget_per_kind) {
    const auto cfg = small(Command::static_sweep);
    const auto res = run_static(cfg);
    const long long nt = 4;
    for (const auto &k : res.cost.per_kind) {
        const long long expected = is_low_rank(k.kind) ? 3 * 5 * nt : 15 * nt;
        EXPECT_EQ(k.expm_per_realization, expected) << to_string(k.kind);
    }
    EXPECT_EQ(res.cost.expm_applications, 6 * (2 * 15 * nt + 2 * 15 * nt));
}

TEST(Experiments, csv_is_identical_across_runs_and_thread_counts) {
    for (Command c : kAllCommands) {
        auto cfg = small(c);
        const auto a = run_experiment(cfg);
        cfg.ensemble.threads = 3;
        const auto b = run_experiment(cfg);
        EXPECT_EQ(a.csv, b.csv) << command_name(c);
        EXPECT_EQ(a.raw_csv, b.raw_csv) << command_name(c);
        EXPECT_EQ(a.sidecar["config_hash"], b.sidecar["config_hash"]);
    }
}

TEST(Experiments, seed_changes_the_output) {
    auto cfg = small(Command::static_sweep);
    const auto a = run_experiment(cfg);
    cfg.ensemble.seed = 18;
    EXPECT_NE(a.csv, run_experiment(cfg).csv);
}

TEST(RankSweep, budget_is_three_r_for_every_kind) {
    const auto res = run_rsweep(small(Command::rsweep));
    for (const auto &k : res.cost.per_kind) {
        EXPECT_EQ(k.expm_per_realization, 3 * k.rank) << to_string(k.kind) << " r=" << k.rank;
    }
    EXPECT_EQ(res.slopes.size(), 4u);
    for (const auto &row : res.rows) EXPECT_GT(row.variance_std_error, 0.0);
}

TEST(RankSweep, slope_matches_a_direct_fit) {
    const auto res = run_rsweep(small(Command::rsweep));
    std::vector<double> xs, ys;
    for (const auto &row : res.rows) {
        if (row.kind != EstimatorKind::LTQT) continue;
        xs.push_back(static_cast<double>(row.rank));
        ys.push_back(row.stats.variance);
    }
    EXPECT_DOUBLE_EQ(res.slopes.at(EstimatorKind::LTQT).slope, fit_power_law(xs, ys).slope);
}

TEST(QuenchExperiment, exact_column_matches_dense_oracle) {
    const auto cfg = small(Command::quench);
    const auto res = run_quench(cfg);
    const auto h0 = oracle::sector_xxz(8, 0.0);
    const auto h1 = oracle::sector_xxz(8, 4.0);
    const auto c = oracle::sector_correlator(8);
    ASSERT_EQ(res.rows.size(), 10u);
    for (const auto &row : res.rows) EXPECT_NEAR(row.exact, oracle::quench(h0, h1, c, 0.5, row.t), 1e-12) << row.t;
}

TEST(QuenchExperiment, real_time_budget_is_two_r_against_three_r) {
    const auto cfg = small(Command::quench);
    const auto res = run_quench(cfg);
    ASSERT_EQ(res.cost.per_kind.size(), 2u);
    EXPECT_EQ(res.cost.per_kind[0].kind, EstimatorKind::LTQT);
    EXPECT_EQ(res.cost.per_kind[0].realtime_per_step, 3 * 6);
    EXPECT_EQ(res.cost.per_kind[1].kind, EstimatorKind::LR_LTQT);
    EXPECT_EQ(res.cost.per_kind[1].realtime_per_step, 2 * 6);
    EXPECT_EQ(res.cost.realtime_applications, 6 * 5 * (18 + 12));
}

TEST(TraceError, matches_gram_schmidt_oracle) {
    // the sketch is drawn in the eigenbasis; V S is the same sketch in the
    // configuration basis
    const int L = 8;
    const auto h = oracle::sector_xxz(L, 0.0);
    Eigen::SelfAdjointEigenSolver<oracle::Mat> es(h);
    const oracle::Mat s = oracle::Mat::Random(h.rows(), 9);
    const std::vector<Index> ranks{1, 4, 9};
    for (double beta : {0.5, 2.0}) {
        const auto errs = lowrank_trace_errors(es.eigenvalues(), beta, s, ranks);
        const oracle::Mat a = oracle::expm(-beta * h);
        const oracle::Mat y = a * (es.eigenvectors() * s);
        for (std::size_t i = 0; i < ranks.size(); ++i) {
            const oracle::Mat q = oracle::gram_schmidt(y.leftCols(ranks[i]));
            const double z = a.trace();
            const double expected = std::abs(z - (q.transpose() * a * q).trace()) / z;
            EXPECT_NEAR(errs[i], expected, 1e-10) << "beta=" << beta << " r=" << ranks[i];
        }
    }
}

TEST(TraceError, full_rank_gives_zero_error) {
    auto cfg = small(Command::traceerr);
    cfg.schedule.ranks = {35, 70};
    const auto res = run_traceerr(cfg);
    for (const auto &row : res.rows) {
        if (row.rank != 70) continue;
        EXPECT_NEAR(row.lr_err, 0.0, 1e-12) << row.beta;
        EXPECT_EQ(row.trunc_err, 0.0) << row.beta;
    }
}

TEST(TraceError, truncated_column_matches_sorted_weights) {
    const auto cfg = small(Command::traceerr);
    const auto res = run_traceerr(cfg);
    const auto h = oracle::sector_xxz(8, 0.0);
    Eigen::SelfAdjointEigenSolver<oracle::Mat> es(h);
    for (const auto &row : res.rows) {
        const Eigen::VectorXd w = (-row.beta * es.eigenvalues().array()).exp();
        const double kept = w.head(row.rank).sum();
        EXPECT_NEAR(row.trunc_err, 1.0 - kept / w.sum(), 1e-12);
    }
}
