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

// CSV tables, raw per-realization dumps and the JSON sidecar.
//
// Every subcommand writes three files to the output directory:
//   <command>.csv      the summary table
//   <command>.raw.csv  realization,<keys...>,<value> in long form
//   <command>.json     config_hash, seed, counters, wall_seconds, details

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>

#include <fmt/format.h>

#include <json.hpp>  // vendored nlohmann::json

#include "lrqt/app/config.hpp"
#include "lrqt/app/experiments.hpp"
#include "lrqt/app/format.hpp"

namespace lrqt::app {

inline constexpr std::string_view kStaticHeader = "T,kind,mean,variance,stderr,n,exact";
inline constexpr std::string_view kRankHeader = "r,kind,variance,stderr,n";
inline constexpr std::string_view kQuenchHeader = "t,kind,mean,variance,exact";
inline constexpr std::string_view kTraceHeader = "r,beta,lr_err,trunc_err";

/// varsweep reuses the static table.
inline std::string to_csv(const StaticResult &res) {
    std::string out(kStaticHeader);
    out += '\n';
    for (const auto &row : res.rows) {
        out += fmt::format("{},{},{},{},{},{},{}\n", fmt_number(row.temperature), to_string(row.kind),
                           fmt_number(row.stats.mean), fmt_number(row.stats.variance), fmt_number(row.stats.std_error),
                           row.stats.n_realizations, fmt_number(row.exact));
    }
    return out;
}

/// stderr here is the standard error of the variance column.
inline std::string to_csv(const RankSweepResult &res) {
    std::string out(kRankHeader);
    out += '\n';
    for (const auto &row : res.rows) {
        out += fmt::format("{},{},{},{},{}\n", row.rank, to_string(row.kind), fmt_number(row.stats.variance),
                           fmt_number(row.variance_std_error), row.stats.n_realizations);
    }
    return out;
}

inline std::string to_csv(const QuenchResult &res) {
    std::string out(kQuenchHeader);
    out += '\n';
    for (const auto &row : res.rows) {
        out += fmt::format("{},{},{},{},{}\n", fmt_number(row.t), to_string(row.kind), fmt_number(row.stats.mean),
                           fmt_number(row.stats.variance), fmt_number(row.exact));
    }
    return out;
}

inline std::string to_csv(const TraceErrorResult &res) {
    std::string out(kTraceHeader);
    out += '\n';
    for (const auto &row : res.rows) {
        out += fmt::format("{},{},{},{}\n", row.rank, fmt_number(row.beta), fmt_number(row.lr_err),
                           fmt_number(row.trunc_err));
    }
    return out;
}

inline std::string raw_csv(const RawValues &raw) {
    std::string out = "realization";
    for (const auto &h : raw.key_header) out += "," + h;
    out += "," + raw.value_name + "\n";
    for (std::size_t k = 0; k < raw.values.size(); ++k) {
        for (std::size_t j = 0; j < raw.keys.size(); ++j) {
            out += std::to_string(k);
            for (const auto &key : raw.keys[j]) out += "," + key;
            out += "," + fmt_number(raw.values[k][j]) + "\n";
        }
    }
    return out;
}

using AnyResult = std::variant<StaticResult, RankSweepResult, QuenchResult, TraceErrorResult>;

/// Everything a run produces, ready to write.
struct RunOutput {
    std::string csv;
    std::string raw_csv;
    nlohmann::json sidecar;
    AnyResult result;
};

inline nlohmann::json accounting_json(const Accounting &cost) {
    nlohmann::json per_kind = nlohmann::json::array();
    for (const auto &k : cost.per_kind) {
        nlohmann::json e = {{"kind", std::string(to_string(k.kind))},
                            {is_low_rank(k.kind) ? "r" : "M", k.rank},
                            {"expm_per_realization", k.expm_per_realization}};
        if (k.realtime_per_step) e["realtime_per_step"] = k.realtime_per_step;
        per_kind.push_back(e);
    }
    return per_kind;
}

/// Validates, runs and formats; does not touch the filesystem.
inline RunOutput run_experiment(const ExperimentConfig &cfg, const ProgressSink &progress = {}) {
    validate(cfg);
    const auto start = std::chrono::steady_clock::now();
    RunOutput out;
    const Accounting *cost = nullptr;
    switch (cfg.command) {
        case Command::static_sweep:
        case Command::varsweep: out.result = run_static(cfg, progress); break;
        case Command::rsweep: out.result = run_rsweep(cfg, progress); break;
        case Command::quench: out.result = run_quench(cfg, progress); break;
        case Command::traceerr: out.result = run_traceerr(cfg, progress); break;
    }
    std::visit(
        [&](const auto &res) {
            out.csv = to_csv(res);
            out.raw_csv = raw_csv(res.raw);
            cost = &res.cost;
        },
        out.result);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    auto &j = out.sidecar;
    j["config_hash"] = config_hash(cfg);
    j["seed"] = cfg.ensemble.seed;
    j["expm_applications"] = cost->expm_applications;
    j["realtime_applications"] = cost->realtime_applications;
    j["wall_seconds"] = wall;
    j["command"] = std::string(command_name(cfg.command));
    j["config"] = canonical_json(cfg);
    j["threads"] = cfg.ensemble.threads;
    j["per_kind"] = accounting_json(*cost);
    if (const auto *rs = std::get_if<RankSweepResult>(&out.result)) {
        for (const auto &[kind, fit] : rs->slopes) {
            j["slopes"][std::string(to_string(kind))] = {{"slope", fit.slope}, {"intercept", fit.intercept}};
        }
    }
    return out;
}

/// Writes the three output files; returns the CSV path.
inline std::filesystem::path write_outputs(const ExperimentConfig &cfg, const RunOutput &out) {
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output.directory);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
    const std::string stem(command_name(cfg.command));
    const auto write = [](const fs::path &p, const std::string &text) {
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        f << text;
        f.close();
        if (!f) throw Error("cannot write " + p.string());
    };
    write(dir / (stem + ".csv"), out.csv);
    write(dir / (stem + ".raw.csv"), out.raw_csv);
    write(dir / (stem + ".json"), out.sidecar.dump(2) + "\n");
    return dir / (stem + ".csv");
}

}  // namespace lrqt::app
