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

// Acceptance run. Prints one PASS or FAIL line per criterion on stdout and
// exits nonzero if any fails. Details go to stderr; the data behind criteria
// 1-5 is written to ./acceptance_out.
//
//   lrqt_acceptance [--only 1,4,9] [--out DIR] [--threads N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "lrqt/app/report.hpp"
#include "lrqt/blas_guard.hpp"
#include "lrqt/multitemp.hpp"
#include "oracles.hpp"

using namespace lrqt;
using namespace lrqt::app;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::string summary;
    std::vector<std::string> notes;  // printed to stderr

    void require(bool ok, const std::string &what) {
        if (!ok) {
            pass = false;
            notes.push_back("violated: " + what);
        }
    }
};

struct Settings {
    fs::path out_dir = "acceptance_out";
    unsigned threads = 1;
};

void log(const std::string &msg) { std::cerr << "  " << msg << std::endl; }

/// Resolves cfg in place, runs, writes the three output files and returns
/// the typed result.
template <typename Result>
Result run_and_save(ExperimentConfig &cfg, const Settings &s, const std::string &tag) {
    cfg.ensemble.threads = s.threads;
    cfg.output.directory = (s.out_dir / tag).string();
    resolve(cfg);
    const RunOutput out = run_experiment(cfg, [](const std::string &m) { log(m); });
    write_outputs(cfg, out);
    return std::get<Result>(out.result);
}

const char *name(EstimatorKind k) { return to_string(k).data(); }

// 1. Every kind's mean within 5 standard errors of the spectral oracle.
Verdict oracle_agreement(const Settings &s) {
    ExperimentConfig cfg = default_config(Command::static_sweep);
    cfg.model.L = 14;
    cfg.estimator.rank = 10;
    cfg.estimator.samples = 30;
    cfg.ensemble.n_realizations = 1000;
    cfg.schedule.tmin = 0.1;
    cfg.schedule.tmax = 10.0;
    cfg.schedule.tpoints = 10;
    const auto res = run_and_save<StaticResult>(cfg, s, "c1_static");
    Verdict v;
    double worst = 0.0;
    for (const auto &row : res.rows) {
        const double z = std::abs(row.stats.mean - row.exact) / row.stats.std_error;
        worst = std::max(worst, z);
        v.require(z <= 5.0, fmt::format("{} at T={:.4g}: |mean - exact| = {:.2f} SE", name(row.kind), row.temperature, z));
    }
    v.summary = fmt::format("{} points, largest deviation {:.2f} SE", res.rows.size(), worst);
    return v;
}

// 2. Low-rank variance below plain variance at low T, and not growing as T drops.
Verdict low_temperature_variance(const Settings &s) {
    ExperimentConfig cfg = default_config(Command::varsweep);
    cfg.model.L = 14;
    cfg.estimator.rank = 100;
    cfg.estimator.samples = 300;
    cfg.ensemble.n_realizations = 200;
    cfg.schedule.temperatures = {0.1, 0.2, 0.5};
    const auto res = run_and_save<StaticResult>(cfg, s, "c2_varsweep");
    std::map<std::pair<double, EstimatorKind>, double> var;
    for (const auto &row : res.rows) var[{row.temperature, row.kind}] = row.stats.variance;
    Verdict v;
    using K = EstimatorKind;
    for (double t : cfg.schedule.temperatures) {
        for (auto [lr, qt] : {std::pair{K::LR_LTQT, K::LTQT}, std::pair{K::LR_HTQT, K::HTQT}}) {
            const double a = var[{t, lr}], b = var[{t, qt}];
            log(fmt::format("T={}: var({})={:.3e} var({})={:.3e}", t, name(lr), a, name(qt), b));
            v.require(a < b, fmt::format("T={}: var({}) = {:.3e} not below var({}) = {:.3e}", t, name(lr), a, name(qt), b));
        }
    }
    for (auto lr : {K::LR_LTQT, K::LR_HTQT}) {
        for (auto [hi, lo] : {std::pair{0.5, 0.2}, std::pair{0.2, 0.1}}) {
            const double a = var[{lo, lr}], b = var[{hi, lr}];
            v.require(a <= 2.0 * b, fmt::format("var({}) at T={} is {:.3e}, above 2x its value {:.3e} at T={}", name(lr),
                                                lo, a, b, hi));
        }
    }
    v.summary = fmt::format("T in {{0.1, 0.2, 0.5}}, n={}", cfg.ensemble.n_realizations);
    return v;
}

// 3. Variance against rank at T = 1: low-rank slope at least 0.25 steeper.
Verdict rank_scaling(const Settings &s) {
    ExperimentConfig cfg = default_config(Command::rsweep);
    cfg.model.L = 14;
    cfg.schedule.beta = 1.0;
    cfg.schedule.ranks = {10, 20, 40, 80, 160};
    cfg.schedule.samples_per_rank = 3;
    cfg.ensemble.n_realizations = 200;
    const auto res = run_and_save<RankSweepResult>(cfg, s, "c3_rsweep");
    Verdict v;
    using K = EstimatorKind;
    std::vector<std::string> parts;
    for (auto [lr, qt] : {std::pair{K::LR_LTQT, K::LTQT}, std::pair{K::LR_HTQT, K::HTQT}}) {
        const double a = res.slopes.at(lr).slope, b = res.slopes.at(qt).slope;
        parts.push_back(fmt::format("{} {:.3f} vs {} {:.3f}", name(lr), a, name(qt), b));
        v.require(a <= b - 0.25, fmt::format("slope {} = {:.3f} not <= slope {} - 0.25 = {:.3f}", name(lr), a, name(qt), b - 0.25));
        v.require(b >= -1.2 && b <= -0.4, fmt::format("slope {} = {:.3f} outside [-1.2, -0.4]", name(qt), b));
    }
    for (const auto &k : res.cost.per_kind) {
        v.require(k.expm_per_realization == 3 * k.rank,
                  fmt::format("{} at r={} used {} applications, budget is 3r", name(k.kind), k.rank, k.expm_per_realization));
    }
    v.summary = "slopes " + parts[0] + "; " + parts[1];
    return v;
}

// 4. Quench: means within 5 SE, low-rank variance smaller at >= 80% of times,
//    2r against 3r real-time evolutions per step.
Verdict quench_dynamics(const Settings &s) {
    ExperimentConfig cfg = default_config(Command::quench);
    cfg.model.L = 14;
    cfg.model.delta = 0.0;
    cfg.model.delta_final = 4.0;
    cfg.schedule.beta = 0.5;
    cfg.estimator.rank = 100;
    cfg.estimator.samples = 300;
    cfg.estimator.kinds = {EstimatorKind::LTQT, EstimatorKind::LR_LTQT};
    cfg.ensemble.n_realizations = 100;
    const auto res = run_and_save<QuenchResult>(cfg, s, "c4_quench");
    Verdict v;
    const double n = static_cast<double>(cfg.ensemble.n_realizations);
    double worst = 0.0;
    std::map<double, std::map<EstimatorKind, double>> var;
    for (const auto &row : res.rows) {
        const double z = std::abs(row.stats.mean - row.exact) / std::sqrt(row.stats.variance / n);
        worst = std::max(worst, z);
        v.require(z <= 5.0, fmt::format("{} at t={}: {:.2f} SE from exact", name(row.kind), row.t, z));
        var[row.t][row.kind] = row.stats.variance;
    }
    std::size_t better = 0;
    for (const auto &[t, m] : var) better += m.at(EstimatorKind::LR_LTQT) <= m.at(EstimatorKind::LTQT) ? 1 : 0;
    const double frac = static_cast<double>(better) / static_cast<double>(var.size());
    v.require(frac >= 0.8, fmt::format("low-rank variance smaller at only {:.1f}% of times", 100 * frac));
    for (const auto &k : res.cost.per_kind) {
        const long long expected = is_low_rank(k.kind) ? 2 * cfg.estimator.rank : 3 * cfg.estimator.rank;
        v.require(k.realtime_per_step == expected, fmt::format("{} evolved {} vectors per step, expected {}", name(k.kind),
                                                               k.realtime_per_step, expected));
        log(fmt::format("{}: {} real-time evolutions per step", name(k.kind), k.realtime_per_step));
    }
    v.summary = fmt::format("{} times, largest deviation {:.2f} SE, LR variance smaller at {:.1f}%", var.size(), worst,
                            100 * frac);
    return v;
}

// 5. Randomized and truncated trace errors on L = 10.
Verdict trace_error_tracking(const Settings &s) {
    ExperimentConfig cfg = default_config(Command::traceerr);
    cfg.model.L = 10;
    cfg.schedule.betas = {0.5, 1.0, 2.0, 4.0};
    cfg.ensemble.n_realizations = 100;
    const auto res = run_and_save<TraceErrorResult>(cfg, s, "c5_traceerr");
    std::map<double, std::vector<TraceErrorRow>> by_beta;
    std::map<Index, std::vector<TraceErrorRow>> by_rank;
    for (const auto &row : res.rows) {
        by_beta[row.beta].push_back(row);
        by_rank[row.rank].push_back(row);
    }
    Verdict v;
    double worst_ratio = 1.0;
    for (const auto &[beta, rows] : by_beta) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto &row = rows[i];
            const double ratio = std::max(row.lr_err, row.trunc_err) / std::min(row.lr_err, row.trunc_err);
            worst_ratio = std::max(worst_ratio, ratio);
            v.require(ratio <= 10.0, fmt::format("beta={} r={}: errors {:.3e} and {:.3e} differ by more than 10x", beta,
                                                 row.rank, row.lr_err, row.trunc_err));
            if (i == 0) continue;
            v.require(row.lr_err <= rows[i - 1].lr_err, fmt::format("beta={}: lr_err grows from r={} to r={}", beta,
                                                                   rows[i - 1].rank, row.rank));
            v.require(row.trunc_err <= rows[i - 1].trunc_err, fmt::format("beta={}: trunc_err grows from r={} to r={}",
                                                                         beta, rows[i - 1].rank, row.rank));
        }
    }
    for (const auto &[r, rows] : by_rank) {
        for (std::size_t i = 1; i < rows.size(); ++i) {
            v.require(rows[i].lr_err < rows[i - 1].lr_err, fmt::format("r={}: lr_err does not drop from beta={} to beta={}",
                                                                      r, rows[i - 1].beta, rows[i].beta));
            v.require(rows[i].trunc_err < rows[i - 1].trunc_err,
                      fmt::format("r={}: trunc_err does not drop from beta={} to beta={}", r, rows[i - 1].beta, rows[i].beta));
        }
    }
    v.summary = fmt::format("ranks up to {}, largest ratio {:.2f}", cfg.schedule.ranks.back(), worst_ratio);
    return v;
}

struct SmallChain {
    SectorBasis basis;
    std::shared_ptr<const OperatorMatrix> h;
    OperatorMatrix c;
    std::shared_ptr<const SpectralDecomposition> spec;
    PropagatorPlan plan;
    explicit SmallChain(int L)
        : basis(build_sector_basis(L, 0.0)),
          h(std::make_shared<const OperatorMatrix>(build_xxz_hamiltonian(basis, 0.0))),
          c(build_nn_correlator(basis)),
          spec(std::make_shared<const SpectralDecomposition>(full_diagonalize(*h))),
          plan(PropagatorPlan::spectral(spec)) {}
};

// 6. The cached multi-temperature sweep equals per-temperature estimates.
Verdict reuse_path(const Settings &) {
    const SmallChain ch(10);
    Verdict v;
    double worst = 0.0;
    for (auto kind : {EstimatorKind::LR_LTQT, EstimatorKind::LR_HTQT}) {
        const TemperatureSweep sweep{{0.5, 1.0, 2.0}, kind, 20};
        for (std::uint64_t k = 0; k < 5; ++k) {
            const auto swept = sweep_lrqt(sweep, ch.plan, ch.c, 11, k);
            for (std::size_t i = 0; i < sweep.beta_grid.size(); ++i) {
                const auto direct = lrqt_expectation(kind, ch.plan, ch.c, sweep.beta_grid[i], 20, 11, k);
                const double rel = std::abs(swept[i].value - direct.value) / std::abs(direct.value);
                worst = std::max(worst, rel);
                v.require(rel <= 1e-8, fmt::format("{} beta={} realization {}: relative gap {:.2e}", name(kind),
                                                   sweep.beta_grid[i], k, rel));
            }
        }
    }
    v.summary = fmt::format("largest relative gap {:.2e}", worst);
    return v;
}

// 7. Identity observable, full rank, and beta = 0.
Verdict exactness(const Settings &) {
    Verdict v;
    {
        const SmallChain ch(10);
        const OperatorMatrix id = OperatorMatrix::identity(ch.basis.dim());
        for (auto kind : kAllKinds) {
            for (double beta : {0.0, 0.5, 2.0, 8.0}) {
                const double value = estimate_expectation(kind, ch.plan, id, beta, 12, 3, 1).value;
                v.require(value == 1.0, fmt::format("{} beta={}: identity gives {:.17g}", name(kind), beta, value));
            }
        }
    }
    double worst = 0.0;
    {
        const int L = 8;
        const SmallChain ch(L);
        const Index n = ch.basis.dim();
        const auto h = oracle::sector_xxz(L, 0.0);
        const auto c = oracle::sector_correlator(L);
        for (auto kind : {EstimatorKind::LR_LTQT, EstimatorKind::LR_HTQT}) {
            for (double beta : {0.3, 1.0, 2.0}) {
                const auto e = lrqt_expectation(kind, ch.plan, ch.c, beta, n, 5, 0);
                const double gap = std::abs(e.value - oracle::thermal(h, c, beta));
                worst = std::max(worst, gap);
                v.require(gap <= 1e-9, fmt::format("{} beta={} r=dim: off by {:.2e}", name(kind), beta, gap));
                v.require(e.numerator.stochastic_term == 0.0 && e.partition.stochastic_term == 0.0,
                          fmt::format("{} beta={} r=dim: nonzero stochastic term", name(kind), beta));
            }
        }
        for (auto kind : {EstimatorKind::LR_LTQT, EstimatorKind::LR_HTQT}) {
            for (Index r : {1, 7, 30}) {
                const auto e = lrqt_expectation(kind, ch.plan, ch.c, 0.0, r, 5, 2);
                const double z = std::exp(e.partition.log_scale) * e.partition.deterministic_term;
                v.require(std::abs(z - static_cast<double>(r)) <= 1e-12 * r,
                          fmt::format("{} beta=0 r={}: deterministic Z term {:.17g}", name(kind), r, z));
            }
        }
    }
    v.summary = fmt::format("r=dim largest error {:.2e}", worst);
    return v;
}

// 8. Cholesky and QR agree on a well-conditioned block; Cholesky refuses a
//    rank-deficient one.
Verdict orthogonalization(const Settings &) {
    Verdict v;
    const SmallChain ch(10);
    const RealBlock s = sample_gaussian_block(ch.basis.dim(), 20, 7, 0).vectors;
    const RealBlock y = ch.plan.imag_time_apply(0.5, ScaledBlock<double>(s)).vectors;
    const RangeBasis qr = orthogonalize_qr(y);
    const RangeBasis chol = orthogonalize_cholesky(y);
    const double rel = (chol.r_factor - qr.r_factor).norm() / qr.r_factor.norm();
    v.require(rel <= 1e-8, fmt::format("R factors differ by {:.2e} relative", rel));
    RealBlock deficient = y;
    deficient.col(19) = y.col(3) - 2.0 * y.col(8);
    bool threw = false;
    try {
        orthogonalize_cholesky(deficient);
    } catch (const NotPositiveDefinite &) {
        threw = true;
    }
    v.require(threw, "Cholesky path accepted a rank-deficient block");
    v.summary = fmt::format("R agreement {:.2e}, rank-deficient block {}", rel, threw ? "rejected" : "accepted");
    return v;
}

std::string slurp(const fs::path &p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// 9. Every subcommand writes the same CSV bytes when re-run.
Verdict determinism(const Settings &s) {
    Verdict v;
    for (Command c : kAllCommands) {
        ExperimentConfig cfg = default_config(c);
        cfg.model.L = 10;
        cfg.ensemble.n_realizations = 8;
        cfg.ensemble.seed = 20260;
        if (c == Command::static_sweep || c == Command::varsweep) {
            // r = 100 would be rank deficient at beta = 10 in 252 states
            cfg.estimator.rank = 20;
            cfg.estimator.samples = 60;
            cfg.schedule.tpoints = 5;
        }
        if (c == Command::rsweep) cfg.schedule.ranks = {5, 10, 20};
        if (c == Command::quench) {
            cfg.estimator.rank = 20;
            cfg.estimator.samples = 60;
            cfg.schedule.t_max = 2.0;
        }
        resolve(cfg);
        std::vector<std::string> csvs;
        for (unsigned threads : {1U, 1U, 3U}) {
            cfg.ensemble.threads = threads;
            cfg.output.directory = (s.out_dir / "c9" / std::to_string(csvs.size())).string();
            write_outputs(cfg, run_experiment(cfg));
            csvs.push_back(slurp(fs::path(cfg.output.directory) / (std::string(command_name(c)) + ".csv")));
        }
        v.require(csvs[0] == csvs[1], std::string(command_name(c)) + ": re-run changed the CSV");
        v.require(csvs[0] == csvs[2], std::string(command_name(c)) + ": thread count changed the CSV");
        v.require(csvs[0].size() > 40, std::string(command_name(c)) + ": CSV is empty");
    }
    v.summary = "5 subcommands, 3 runs each";
    return v;
}

struct Criterion {
    int id;
    const char *title;
    std::function<Verdict(const Settings &)> check;
};

}  // namespace

int main(int argc, char **argv) {
    ensure_sound_blas(argv);
    Settings settings;
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string t; std::getline(ss, t, ',');) only.insert(std::stoi(t));
        } else if (a == "--out" && i + 1 < argc) {
            settings.out_dir = argv[++i];
        } else if (a == "--threads" && i + 1 < argc) {
            settings.threads = static_cast<unsigned>(std::stoul(argv[++i]));
        } else {
            std::cerr << "usage: lrqt_acceptance [--only 1,2,...] [--out DIR] [--threads N]\n";
            return 2;
        }
    }

    const std::vector<Criterion> criteria = {
        {1, "oracle agreement", oracle_agreement},
        {2, "low-temperature variance ordering", low_temperature_variance},
        {3, "rank scaling", rank_scaling},
        {4, "quench dynamics", quench_dynamics},
        {5, "trace-error tracking", trace_error_tracking},
        {6, "reuse-path equivalence", reuse_path},
        {7, "exactness invariants", exactness},
        {8, "orthogonalization cross-check", orthogonalization},
        {9, "determinism", determinism},
    };
    int failed = 0;
    for (const auto &c : criteria) {
        if (!only.empty() && !only.contains(c.id)) continue;
        std::cerr << "criterion " << c.id << ": " << c.title << std::endl;
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.check(settings);
        } catch (const std::exception &e) {
            v.pass = false;
            v.summary = std::string("error: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        for (std::size_t i = 0; i < v.notes.size() && i < 20; ++i) log(v.notes[i]);
        if (v.notes.size() > 20) log("... and " + std::to_string(v.notes.size() - 20) + " more");
        std::cout << fmt::format("{} criterion {} ({}): {} [{:.0f} s]", v.pass ? "PASS" : "FAIL", c.id, c.title,
                                 v.summary, secs)
                  << std::endl;
        failed += v.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
