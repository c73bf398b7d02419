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

// Command-line front end. Settings are layered: subcommand defaults, then the
// --config file, then individual flags.

#pragma once

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lrqt/app/config.hpp"
#include "lrqt/app/report.hpp"

namespace lrqt::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

/// Flag values; unset optionals leave the config untouched.
struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<unsigned> threads;
    std::optional<int> L;
    std::optional<double> delta, delta_final, tmin, tmax, beta, t_max, t_step;
    std::optional<Index> rank, samples, samples_per_rank;
    std::optional<int> tpoints;
    std::optional<std::uint64_t> nreal;
    std::vector<std::string> kinds;
    std::vector<Index> ranks;
    std::vector<double> betas, temperatures;
};

inline std::vector<EstimatorKind> kinds_from_flags(const std::vector<std::string> &names) {
    std::vector<EstimatorKind> out;
    for (const auto &n : names) {
        const auto k = parse_kind(n);
        if (!k) throw ConfigError("--kinds", "unknown kind '" + n + "' (HTQT, LTQT, LR_HTQT, LR_LTQT)");
        out.push_back(*k);
    }
    return out;
}

template <typename T>
void set_if(const std::optional<T> &v, T &field, ExperimentConfig &cfg, const std::string &key, const std::string &flag) {
    if (v) {
        field = *v;
        cfg.origin[key] = flag;
    }
}

inline ExperimentConfig build_config(Command c, const Overrides &o) {
    ExperimentConfig cfg = default_config(c);
    if (!o.config_path.empty()) apply_yaml_file(cfg, o.config_path);
    set_if(o.seed, cfg.ensemble.seed, cfg, "ensemble.seed", "--seed");
    set_if(o.out, cfg.output.directory, cfg, "output.directory", "--out");
    set_if(o.threads, cfg.ensemble.threads, cfg, "ensemble.threads", "--threads");
    set_if(o.nreal, cfg.ensemble.n_realizations, cfg, "ensemble.n_realizations", "--nreal");
    set_if(o.L, cfg.model.L, cfg, "model.L", "--L");
    set_if(o.delta, cfg.model.delta, cfg, "model.delta", "--delta");
    set_if(o.delta_final, cfg.model.delta_final, cfg, "model.delta_final", "--delta-final");
    set_if(o.rank, cfg.estimator.rank, cfg, "estimator.rank", "--rank");
    set_if(o.samples, cfg.estimator.samples, cfg, "estimator.samples", "--samples");
    set_if(o.tmin, cfg.schedule.tmin, cfg, "schedule.tmin", "--tmin");
    set_if(o.tmax, cfg.schedule.tmax, cfg, "schedule.tmax", "--tmax");
    set_if(o.tpoints, cfg.schedule.tpoints, cfg, "schedule.tpoints", "--tpoints");
    set_if(o.beta, cfg.schedule.beta, cfg, "schedule.beta", "--beta");
    set_if(o.t_max, cfg.schedule.t_max, cfg, "schedule.t_max", "--t-max");
    set_if(o.t_step, cfg.schedule.t_step, cfg, "schedule.t_step", "--t-step");
    set_if(o.samples_per_rank, cfg.schedule.samples_per_rank, cfg, "schedule.samples_per_rank", "--samples-per-rank");
    if (o.tmin || o.tmax || o.tpoints) cfg.schedule.temperatures.clear();
    if (!o.temperatures.empty()) {
        cfg.schedule.temperatures = o.temperatures;
        cfg.origin["schedule.temperatures"] = "--temperatures";
    }
    if (!o.kinds.empty()) {
        cfg.estimator.kinds = kinds_from_flags(o.kinds);
        cfg.origin["estimator.kinds"] = "--kinds";
    }
    if (!o.ranks.empty()) {
        cfg.schedule.ranks = o.ranks;
        cfg.origin["schedule.ranks"] = "--ranks";
    }
    if (!o.betas.empty()) {
        cfg.schedule.betas = o.betas;
        cfg.origin["schedule.betas"] = "--betas";
    }
    resolve(cfg);
    validate(cfg);
    return cfg;
}

}  // namespace detail

/// Parses, runs one subcommand and writes its outputs. Returns an exit code.
inline int cli_main(int argc, char **argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
    CLI::App app{"Quantum typicality and low-rank trace estimators for the XXZ chain", "lrqt"};
    app.require_subcommand(1);
    detail::Overrides o;
    bool quiet = false;
    app.add_option("--config", o.config_path, "YAML experiment file")->check(CLI::ExistingFile);
    app.add_option("--seed", o.seed, "global 64-bit seed");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--threads", o.threads, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
    app.add_flag("--quiet,-q", quiet, "no progress messages");

    const auto add_model = [&](CLI::App *s) {
        s->add_option("--L", o.L, "chain length");
        s->add_option("--delta", o.delta, "anisotropy");
        s->add_option("--nreal", o.nreal, "number of realizations");
    };
    const auto add_estimator = [&](CLI::App *s) {
        s->add_option("--rank", o.rank, "rank r of the low-rank kinds");
        s->add_option("--samples", o.samples, "probe vectors M of the plain kinds");
    };
    const auto add_kinds = [&](CLI::App *s) {
        s->add_option("--kinds", o.kinds, "estimator kinds")->delimiter(',');
    };
    std::vector<std::pair<CLI::App *, Command>> subs;

    for (Command c : {Command::static_sweep, Command::varsweep}) {
        auto *s = app.add_subcommand(std::string(command_name(c)),
                                     c == Command::static_sweep ? "mean of each kind over a temperature grid"
                                                                : "variance of each kind over a temperature grid");
        add_model(s);
        add_estimator(s);
        add_kinds(s);
        s->add_option("--tmin", o.tmin, "lowest temperature");
        s->add_option("--tmax", o.tmax, "highest temperature");
        s->add_option("--tpoints", o.tpoints, "log-spaced grid points");
        s->add_option("--temperatures", o.temperatures, "explicit temperature list")->delimiter(',');
        subs.emplace_back(s, c);
    }
    {
        auto *s = app.add_subcommand("rsweep", "variance against rank at one temperature");
        add_model(s);
        add_kinds(s);
        s->add_option("--beta", o.beta, "inverse temperature");
        s->add_option("--ranks", o.ranks, "rank grid")->delimiter(',');
        s->add_option("--samples-per-rank", o.samples_per_rank, "M / r for the plain kinds");
        subs.emplace_back(s, Command::rsweep);
    }
    {
        auto *s = app.add_subcommand("quench", "expectation after a sudden change of delta");
        add_model(s);
        add_estimator(s);
        add_kinds(s);
        s->add_option("--delta-final", o.delta_final, "anisotropy after the quench");
        s->add_option("--beta", o.beta, "inverse temperature of the initial state");
        s->add_option("--t-max", o.t_max, "last time point");
        s->add_option("--t-step", o.t_step, "time step");
        subs.emplace_back(s, Command::quench);
    }
    {
        auto *s = app.add_subcommand("traceerr", "partition-function error of the rank-r approximation");
        add_model(s);
        s->add_option("--betas", o.betas, "inverse temperatures")->delimiter(',');
        s->add_option("--ranks", o.ranks, "rank grid")->delimiter(',');
        subs.emplace_back(s, Command::traceerr);
    }
    for (auto &[s, c] : subs) s->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        std::ostringstream o_out, o_err;
        const int code = app.exit(e, o_out, o_err);
        out << o_out.str();
        err << o_err.str();
        return code == 0 ? kExitOk : kExitUsage;
    }

    Command command = Command::static_sweep;
    for (auto &[s, c] : subs) {
        if (s->parsed()) command = c;
    }
    try {
        const ExperimentConfig cfg = detail::build_config(command, o);
        const ProgressSink progress = quiet ? ProgressSink{} : ProgressSink([&err](const std::string &msg) {
            err << "[lrqt] " << msg << std::endl;
        });
        const RunOutput result = run_experiment(cfg, progress);
        const auto path = write_outputs(cfg, result);
        out << path.string() << "\n";
        return kExitOk;
    } catch (const ConfigError &e) {
        err << "lrqt: config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception &e) {
        err << "lrqt: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace lrqt::app
