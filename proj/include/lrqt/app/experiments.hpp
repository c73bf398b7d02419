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

// The five experiments behind the CLI subcommands. Each runner returns typed
// rows plus per-realization raw values and cost counters; report.hpp turns a
// result into CSV and JSON.

#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "lrqt/app/config.hpp"
#include "lrqt/app/format.hpp"
#include "lrqt/dynamics.hpp"
#include "lrqt/ensemble_stats.hpp"
#include "lrqt/frames.hpp"
#include "lrqt/lattice_model.hpp"
#include "lrqt/spectral_kernels.hpp"
#include "lrqt/spectral_oracle.hpp"

namespace lrqt::app {

/// Receives human-readable progress lines; may be empty.
using ProgressSink = std::function<void(const std::string &)>;

/// One XXZ chain with the nearest-neighbour correlator, diagonalized once.
struct ModelData {
    int L;
    double delta;
    double total_sz;
    OperatorMatrix hamiltonian;
    OperatorMatrix observable;
    SpectralDecomposition spectrum;  // with eigenvectors
    EigenbasisFrame frame;

    ModelData(int chain_length, double anisotropy, double sz)
        : ModelData(chain_length, anisotropy, sz, build_sector_basis(chain_length, sz)) {}

  private:
    ModelData(int chain_length, double anisotropy, double sz, const SectorBasis &basis)
        : L(chain_length),
          delta(anisotropy),
          total_sz(sz),
          hamiltonian(build_xxz_hamiltonian(basis, anisotropy)),
          observable(build_nn_correlator(basis)),
          spectrum(full_diagonalize(hamiltonian)),
          frame(make_eigenbasis_frame(spectrum, observable)) {}
};

/// Diagonalizes on first use and keeps the result for the process lifetime.
/// Full diagonalization dominates setup, and several experiments share a
/// model.
inline std::shared_ptr<const ModelData> model_data(int L, double delta, double total_sz,
                                                   const ProgressSink &progress = {}) {
    static std::mutex mutex;
    static std::map<std::tuple<int, double, double>, std::shared_ptr<const ModelData>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    const auto key = std::make_tuple(L, delta, total_sz);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    if (progress) progress("diagonalizing L=" + std::to_string(L) + " delta=" + fmt_number(delta));
    auto m = std::make_shared<const ModelData>(L, delta, total_sz);
    cache.emplace(key, m);
    return m;
}

inline std::shared_ptr<const ModelData> model_data(const ExperimentConfig &cfg, const ProgressSink &progress = {}) {
    return model_data(cfg.model.L, cfg.model.delta, cfg.model.total_sz, progress);
}

/// Application counts of one estimator kind, per realization.
struct KindCost {
    EstimatorKind kind{};
    Index rank = 0;  // r for low-rank kinds, M for plain ones
    long long expm_per_realization = 0;
    long long realtime_per_step = 0;  // quench only
};

struct Accounting {
    long long expm_applications = 0;
    long long realtime_applications = 0;
    std::vector<KindCost> per_kind;
};

/// Realization-major raw outputs with a label per output column.
struct RawValues {
    std::vector<std::string> key_header;           // e.g. {"T", "kind"}
    std::vector<std::vector<std::string>> keys;    // one per output column
    std::string value_name = "value";
    std::vector<std::vector<double>> values;       // values[k][j]
};

struct StaticRow {
    double temperature = 0.0;
    EstimatorKind kind{};
    EnsembleStats stats;
    double exact = 0.0;
};

struct StaticResult {
    std::vector<StaticRow> rows;
    Accounting cost;
    RawValues raw;
};

struct RankRow {
    Index rank = 0;
    EstimatorKind kind{};
    EnsembleStats stats;
    double variance_std_error = 0.0;
};

struct RankSweepResult {
    std::vector<RankRow> rows;
    std::map<EstimatorKind, PowerLawFit> slopes;  // log variance against log r
    Accounting cost;
    RawValues raw;
};

struct QuenchRow {
    double t = 0.0;
    EstimatorKind kind{};
    EnsembleStats stats;
    double exact = 0.0;
};

struct QuenchResult {
    std::vector<QuenchRow> rows;
    Accounting cost;
    RawValues raw;
};

struct TraceErrorRow {
    Index rank = 0;
    double beta = 0.0;
    double lr_err = 0.0;
    double trunc_err = 0.0;
};

struct TraceErrorResult {
    std::vector<TraceErrorRow> rows;
    Accounting cost;
    RawValues raw;
};

namespace detail {

/// Wraps an experiment so that progress is reported about every 10%.
inline VectorExperiment with_progress(VectorExperiment f, std::uint64_t n, const ProgressSink &progress,
                                      const std::string &label) {
    if (!progress) return f;
    auto done = std::make_shared<std::atomic<std::uint64_t>>(0);
    return [f = std::move(f), n, progress, label, done](std::uint64_t seed, std::uint64_t k) {
        auto out = f(seed, k);
        const std::uint64_t d = ++*done;
        if (d == n || (n >= 10 && d % (n / 10) == 0)) {
            progress(label + ": " + std::to_string(d) + "/" + std::to_string(n) + " realizations");
        }
        return out;
    };
}

inline long long per_realization(long long total, std::uint64_t n) {
    return total / static_cast<long long>(n);
}

inline std::vector<double> betas_of(const std::vector<double> &temperatures) {
    std::vector<double> b;
    for (double t : temperatures) b.push_back(1.0 / t);
    return b;
}

}  // namespace detail

/// static and varsweep: every configured kind over the temperature grid.
inline StaticResult run_static(const ExperimentConfig &cfg, const ProgressSink &progress = {}) {
    const auto model = model_data(cfg, progress);
    const std::vector<double> temps = cfg.temperature_grid();
    const std::vector<double> betas = detail::betas_of(temps);
    const auto &kinds = cfg.estimator.kinds;
    const Index r = cfg.estimator.rank;
    const Index m = cfg.estimator.samples;
    const std::size_t nt = temps.size();

    // one counter set per kind; the plain kinds share their probe block
    std::vector<EigenbasisFrame> frames;
    std::vector<SpectralStaticKernel> kernels;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        frames.push_back(with_fresh_counters(model->frame));
        kernels.emplace_back(frames.back());
    }
    std::vector<EstimatorKind> qt_kinds;
    std::vector<std::size_t> qt_slots;
    std::vector<CostCounters *> qt_charge;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        if (!is_low_rank(kinds[i])) {
            qt_kinds.push_back(kinds[i]);
            qt_slots.push_back(i);
            qt_charge.push_back(&frames[i].plan.counters());
        }
    }

    VectorExperiment experiment = [&](std::uint64_t seed, std::uint64_t k) {
        std::vector<double> out(kinds.size() * nt);
        if (!qt_kinds.empty()) {
            const auto sweeps = kernels[qt_slots[0]].qt_sweeps(qt_kinds, betas, m, seed, k, qt_charge);
            for (std::size_t q = 0; q < qt_kinds.size(); ++q) {
                for (std::size_t j = 0; j < nt; ++j) out[qt_slots[q] * nt + j] = sweeps[q][j].value;
            }
        }
        for (std::size_t i = 0; i < kinds.size(); ++i) {
            if (!is_low_rank(kinds[i])) continue;
            const auto sweep = kernels[i].lrqt_sweep(kinds[i], betas, r, seed, k);
            for (std::size_t j = 0; j < nt; ++j) out[i * nt + j] = sweep[j].value;
        }
        return out;
    };
    const std::uint64_t n = cfg.ensemble.n_realizations;
    const EnsembleResult ens =
        run_ensemble(detail::with_progress(experiment, n, progress, std::string(command_name(cfg.command))), n,
                     cfg.ensemble.seed, cfg.ensemble.threads);

    const RealVector obs_diag = observable_diagonal(*model->frame.spectrum, *model->frame.observable);
    StaticResult res;
    for (std::size_t j = 0; j < nt; ++j) {
        const double exact = thermal_average(*model->frame.spectrum, obs_diag, betas[j]);
        for (std::size_t i = 0; i < kinds.size(); ++i) {
            res.rows.push_back({temps[j], kinds[i], ens.stats[i * nt + j], exact});
        }
    }
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        const auto &c = frames[i].plan.counters();
        res.cost.expm_applications += c.expm_applications;
        res.cost.per_kind.push_back({kinds[i], is_low_rank(kinds[i]) ? r : m,
                                     detail::per_realization(c.expm_applications, n), 0});
    }
    res.raw.key_header = {"T", "kind"};
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        for (std::size_t j = 0; j < nt; ++j) {
            res.raw.keys.push_back({fmt_number(temps[j]), std::string(to_string(kinds[i]))});
        }
    }
    res.raw.values = ens.raw;
    return res;
}

/// rsweep: variance against rank at one temperature, with M = samples_per_rank * r.
inline RankSweepResult run_rsweep(const ExperimentConfig &cfg, const ProgressSink &progress = {}) {
    const auto model = model_data(cfg, progress);
    const std::vector<double> betas{cfg.schedule.beta};
    const auto &kinds = cfg.estimator.kinds;
    const auto &ranks = cfg.schedule.ranks;
    const std::size_t nk = kinds.size();
    const auto samples_for = [&](EstimatorKind kind, Index r) {
        return is_low_rank(kind) ? r : cfg.schedule.samples_per_rank * r;
    };

    // frames[ri * nk + i] counts kind i at rank ranks[ri]
    std::vector<EigenbasisFrame> frames;
    for (std::size_t c = 0; c < ranks.size() * nk; ++c) frames.push_back(with_fresh_counters(model->frame));
    std::vector<SpectralStaticKernel> kernels(frames.begin(), frames.end());
    std::vector<EstimatorKind> qt_kinds;
    std::vector<std::size_t> qt_slots;
    for (std::size_t i = 0; i < nk; ++i) {
        if (!is_low_rank(kinds[i])) {
            qt_kinds.push_back(kinds[i]);
            qt_slots.push_back(i);
        }
    }

    VectorExperiment experiment = [&](std::uint64_t seed, std::uint64_t k) {
        std::vector<double> out(ranks.size() * nk);
        for (std::size_t ri = 0; ri < ranks.size(); ++ri) {
            const Index r = ranks[ri];
            if (!qt_kinds.empty()) {
                std::vector<CostCounters *> charge;
                for (auto i : qt_slots) charge.push_back(&frames[ri * nk + i].plan.counters());
                const auto sweeps = kernels[ri * nk + qt_slots[0]].qt_sweeps(
                    qt_kinds, betas, samples_for(qt_kinds[0], r), seed, k, charge);
                for (std::size_t q = 0; q < qt_kinds.size(); ++q) out[ri * nk + qt_slots[q]] = sweeps[q][0].value;
            }
            for (std::size_t i = 0; i < nk; ++i) {
                if (!is_low_rank(kinds[i])) continue;
                out[ri * nk + i] = kernels[ri * nk + i].lrqt_sweep(kinds[i], betas, r, seed, k)[0].value;
            }
        }
        return out;
    };
    const std::uint64_t n = cfg.ensemble.n_realizations;
    const EnsembleResult ens =
        run_ensemble(detail::with_progress(experiment, n, progress, "rsweep"), n, cfg.ensemble.seed, cfg.ensemble.threads);

    RankSweepResult res;
    for (std::size_t ri = 0; ri < ranks.size(); ++ri) {
        for (std::size_t i = 0; i < nk; ++i) {
            const std::size_t j = ri * nk + i;
            const auto col = ens.column(j);
            res.rows.push_back({ranks[ri], kinds[i], ens.stats[j], variance_std_error(col)});
            const auto &c = frames[j].plan.counters();
            res.cost.expm_applications += c.expm_applications;
            res.cost.per_kind.push_back({kinds[i], ranks[ri], detail::per_realization(c.expm_applications, n), 0});
            res.raw.keys.push_back({std::to_string(ranks[ri]), std::string(to_string(kinds[i]))});
        }
    }
    for (std::size_t i = 0; i < nk; ++i) {
        std::vector<double> xs, ys;
        for (std::size_t ri = 0; ri < ranks.size(); ++ri) {
            xs.push_back(static_cast<double>(ranks[ri]));
            ys.push_back(ens.stats[ri * nk + i].variance);
        }
        res.slopes[kinds[i]] = fit_power_law(xs, ys);
    }
    res.raw.key_header = {"r", "kind"};
    res.raw.values = ens.raw;
    return res;
}

/// quench: thermal state of H(delta) evolved under H(delta_final).
inline QuenchResult run_quench(const ExperimentConfig &cfg, const ProgressSink &progress = {}) {
    const auto init = model_data(cfg.model.L, cfg.model.delta, cfg.model.total_sz, progress);
    const auto fin = model_data(cfg.model.L, cfg.model.delta_final, cfg.model.total_sz, progress);
    if (progress) progress("building the quench frame");
    const QuenchFrame base = make_quench_frame(init->spectrum, fin->spectrum, init->observable);
    const std::vector<double> grid = uniform_time_grid(cfg.schedule.t_max, cfg.schedule.t_step);
    const double beta = cfg.schedule.beta;
    const auto &kinds = cfg.estimator.kinds;
    const Index r = cfg.estimator.rank;
    const Index m = cfg.estimator.samples;
    const std::size_t nt = grid.size();

    std::vector<QuenchFrame> frames;
    for (std::size_t i = 0; i < kinds.size(); ++i) frames.push_back(with_fresh_counters(base));
    std::vector<SpectralQuenchKernel> kernels(frames.begin(), frames.end());

    VectorExperiment experiment = [&](std::uint64_t seed, std::uint64_t k) {
        std::vector<double> out(kinds.size() * nt);
        for (std::size_t i = 0; i < kinds.size(); ++i) {
            const auto series = is_low_rank(kinds[i]) ? kernels[i].lrdqt(kinds[i], beta, grid, r, seed, k)
                                                      : kernels[i].dqt(kinds[i], beta, grid, m, seed, k);
            for (std::size_t j = 0; j < nt; ++j) out[i * nt + j] = series[j].estimate.value;
        }
        return out;
    };
    const std::uint64_t n = cfg.ensemble.n_realizations;
    const EnsembleResult ens =
        run_ensemble(detail::with_progress(experiment, n, progress, "quench"), n, cfg.ensemble.seed, cfg.ensemble.threads);

    if (progress) progress("exact quench series");
    const std::vector<double> exact = QuenchOracle(init->spectrum, fin->spectrum, init->observable, beta).series(grid);
    QuenchResult res;
    for (std::size_t j = 0; j < nt; ++j) {
        for (std::size_t i = 0; i < kinds.size(); ++i) res.rows.push_back({grid[j], kinds[i], ens.stats[i * nt + j], exact[j]});
    }
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        const auto &ci = frames[i].plan_init.counters();
        const auto &cf = frames[i].plan_final.counters();
        res.cost.expm_applications += ci.expm_applications;
        res.cost.realtime_applications += cf.realtime_applications;
        res.cost.per_kind.push_back({kinds[i], is_low_rank(kinds[i]) ? r : m,
                                     detail::per_realization(ci.expm_applications, n),
                                     detail::per_realization(cf.realtime_applications, n) / static_cast<long long>(nt)});
        for (std::size_t j = 0; j < nt; ++j) res.raw.keys.push_back({fmt_number(grid[j]), std::string(to_string(kinds[i]))});
    }
    res.raw.key_header = {"t", "kind"};
    res.raw.values = ens.raw;
    return res;
}

/// Relative error |Z - Tr(Q^T e^{-beta H} Q)| / Z of the randomized rank-r
/// approximation for every r in `ranks`, from one sketch S with max(ranks)
/// columns. Householder QR makes the leading r columns of Q span exactly
/// the range of the first r columns of e^{-beta H} S, so each prefix is an
/// ordinary rank-r estimate and all ranks share random numbers.
inline std::vector<double> lowrank_trace_errors(const RealVector &energies, double beta, const RealBlock &sketch,
                                                const std::vector<Index> &ranks) {
    const RealVector w = (-beta * (energies.array() - energies.minCoeff())).exp().matrix();
    const double z = w.sum();
    const RealBlock y = w.asDiagonal() * sketch;
    Eigen::HouseholderQR<RealBlock> qr(y);
    const RealBlock q = qr.householderQ() * RealBlock::Identity(y.rows(), y.cols());
    // captured[i] = q_i^T diag(w) q_i
    const RealVector captured = (q.array().square().colwise() * w.array()).colwise().sum().transpose();
    std::vector<double> out;
    double acc = 0.0;
    Index done = 0;
    for (Index r : ranks) {
        for (; done < r; ++done) acc += captured[done];
        out.push_back(std::abs(z - acc) / z);
    }
    return out;
}

/// traceerr: randomized against truncated-spectrum trace error.
inline TraceErrorResult run_traceerr(const ExperimentConfig &cfg, const ProgressSink &progress = {}) {
    const auto model = model_data(cfg, progress);
    const SpectralDecomposition &spec = *model->frame.spectrum;
    const auto &betas = cfg.schedule.betas;
    const auto &ranks = cfg.schedule.ranks;
    const Index r_max = ranks.back();
    const Index dim = spec.dim();
    const PropagatorPlan plan = model->frame.plan.with_fresh_counters();

    VectorExperiment experiment = [&](std::uint64_t seed, std::uint64_t k) {
        const RandomBlock s = sample_gaussian_block(dim, r_max, seed, stream_id(k, StreamRole::range_sketch));
        std::vector<double> out;
        for (double beta : betas) {
            plan.counters().expm_applications += r_max;
            const auto errs = lowrank_trace_errors(spec.eigenvalues, beta, s.vectors, ranks);
            out.insert(out.end(), errs.begin(), errs.end());
        }
        return out;
    };
    const std::uint64_t n = cfg.ensemble.n_realizations;
    const EnsembleResult ens = run_ensemble(detail::with_progress(experiment, n, progress, "traceerr"), n,
                                            cfg.ensemble.seed, cfg.ensemble.threads);

    TraceErrorResult res;
    for (std::size_t b = 0; b < betas.size(); ++b) {
        for (std::size_t ri = 0; ri < ranks.size(); ++ri) {
            res.rows.push_back({ranks[ri], betas[b], ens.stats[b * ranks.size() + ri].mean,
                                truncated_trace_error(spec, betas[b], ranks[ri])});
            res.raw.keys.push_back({std::to_string(ranks[ri]), fmt_number(betas[b])});
        }
    }
    res.cost.expm_applications = plan.counters().expm_applications;
    res.raw.key_header = {"r", "beta"};
    res.raw.value_name = "lr_err";
    res.raw.values = ens.raw;
    return res;
}

}  // namespace lrqt::app
