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

// Experiment configuration: YAML files, command-line overrides, defaults per
// subcommand, validation, and the canonical form that is hashed.
//
// File layout (every section and key optional):
//
//   command: static
//   model:     {L: 14, delta: 0.0, total_sz: 0.0, delta_final: 4.0}
//   estimator: {kinds: [HTQT, LTQT, LR_HTQT, LR_LTQT], rank: 10, samples: 30}
//   schedule:  {tmin: 0.1, tmax: 10, tpoints: 21}
//   ensemble:  {n_realizations: 1000, seed: 1, threads: 1}
//   output:    {directory: out, format: csv}
//
// Schedule keys depend on the subcommand:
//   static, varsweep  tmin, tmax, tpoints, temperatures (explicit list)
//   rsweep            beta, ranks, samples_per_rank
//   quench            beta, t_max, t_step
//   traceerr          betas, ranks

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <yaml-cpp/yaml.h>

#include <json.hpp>  // vendored nlohmann::json

#include "lrqt/estimators.hpp"
#include "lrqt/lattice_model.hpp"
#include "lrqt/spectral_oracle.hpp"

namespace lrqt::app {

enum class Command { static_sweep, varsweep, rsweep, quench, traceerr };

inline constexpr Command kAllCommands[] = {Command::static_sweep, Command::varsweep, Command::rsweep,
                                           Command::quench, Command::traceerr};

inline std::string_view command_name(Command c) {
    switch (c) {
        case Command::static_sweep: return "static";
        case Command::varsweep: return "varsweep";
        case Command::rsweep: return "rsweep";
        case Command::quench: return "quench";
        case Command::traceerr: return "traceerr";
    }
    return "?";
}

inline std::optional<Command> parse_command(std::string_view s) {
    for (auto c : kAllCommands) {
        if (command_name(c) == s) return c;
    }
    return std::nullopt;
}

/// A validation failure. `where` is "file:line:col", a flag name, or empty.
class ConfigError : public Error {
  public:
    ConfigError(const std::string &where, const std::string &what)
        : Error(where.empty() ? what : where + ": " + what), where_(where) {}
    const std::string &where() const { return where_; }

  private:
    std::string where_;
};

struct ModelConfig {
    int L = 14;
    double delta = 0.0;
    double total_sz = 0.0;
    double delta_final = 4.0;  // quench only
};

struct EstimatorConfig {
    std::vector<EstimatorKind> kinds;
    Index rank = 10;
    Index samples = 30;  // M for the plain kinds
};

struct ScheduleConfig {
    double tmin = 0.1;
    double tmax = 10.0;
    int tpoints = 21;
    std::vector<double> temperatures;  // overrides the log grid when set
    double beta = 1.0;
    std::vector<Index> ranks;
    Index samples_per_rank = 3;
    double t_max = 10.0;
    double t_step = 0.1;
    std::vector<double> betas;
};

struct EnsembleConfig {
    std::uint64_t n_realizations = 1000;
    std::uint64_t seed = 1;
    unsigned threads = 1;  // does not affect results
};

struct OutputConfig {
    std::string directory = ".";
    std::string format = "csv";
};

struct ExperimentConfig {
    Command command = Command::static_sweep;
    ModelConfig model;
    EstimatorConfig estimator;
    ScheduleConfig schedule;
    EnsembleConfig ensemble;
    OutputConfig output;

    /// Where each explicitly set value came from, by dotted key.
    std::map<std::string, std::string> origin;

    std::string where(const std::string &key) const {
        auto it = origin.find(key);
        return it == origin.end() ? std::string() : it->second;
    }

    /// Temperatures of the static grids, ascending.
    std::vector<double> temperature_grid() const {
        if (!schedule.temperatures.empty()) return schedule.temperatures;
        std::vector<double> out;
        const int n = schedule.tpoints;
        for (int i = 0; i < n; ++i) {
            if (i == 0) {
                out.push_back(schedule.tmin);
            } else if (i == n - 1) {
                out.push_back(schedule.tmax);
            } else {
                const double f = static_cast<double>(i) / (n - 1);
                out.push_back(schedule.tmin * std::pow(schedule.tmax / schedule.tmin, f));
            }
        }
        return out;
    }
};

/// Sector dimension binom(L, n_up) without enumerating the sector.
inline Index sector_dimension(int L, double total_sz) {
    const long long n_up = std::llround(0.5 * L + total_sz);
    if (n_up < 0 || n_up > L) return 0;
    double d = 1.0;
    for (long long k = 1; k <= n_up; ++k) d = d * static_cast<double>(L - n_up + k) / static_cast<double>(k);
    return static_cast<Index>(std::llround(d));
}

/// Defaults for a subcommand, before any file or flag is applied.
inline ExperimentConfig default_config(Command c) {
    ExperimentConfig cfg;
    cfg.command = c;
    cfg.estimator.kinds.assign(std::begin(kAllKinds), std::end(kAllKinds));
    switch (c) {
        case Command::static_sweep:
            break;
        case Command::varsweep:
            cfg.estimator.rank = 100;
            cfg.estimator.samples = 300;
            cfg.ensemble.n_realizations = 200;
            break;
        case Command::rsweep:
            cfg.schedule.beta = 1.0;
            cfg.schedule.ranks = {10, 20, 40, 80, 160};
            break;
        case Command::quench:
            cfg.estimator.kinds = {EstimatorKind::LTQT, EstimatorKind::LR_LTQT};
            cfg.estimator.rank = 100;
            cfg.estimator.samples = 300;
            cfg.schedule.beta = 0.5;
            cfg.ensemble.n_realizations = 100;
            break;
        case Command::traceerr:
            cfg.schedule.betas = {0.5, 1.0, 2.0, 4.0};
            cfg.ensemble.n_realizations = 100;
            break;
    }
    return cfg;
}

namespace detail {

/// Keys a subcommand accepts, as "section.key".
inline std::set<std::string> allowed_keys(Command c) {
    std::set<std::string> k = {"command",       "model.L",         "model.delta",           "model.total_sz",
                               "ensemble.seed", "ensemble.threads", "ensemble.n_realizations", "output.directory",
                               "output.format", "estimator.kinds"};
    switch (c) {
        case Command::static_sweep:
        case Command::varsweep:
            k.insert({"estimator.rank", "estimator.samples", "schedule.tmin", "schedule.tmax", "schedule.tpoints",
                      "schedule.temperatures"});
            break;
        case Command::rsweep:
            k.insert({"schedule.beta", "schedule.ranks", "schedule.samples_per_rank"});
            break;
        case Command::quench:
            k.insert({"model.delta_final", "estimator.rank", "estimator.samples", "schedule.beta", "schedule.t_max",
                      "schedule.t_step"});
            break;
        case Command::traceerr:
            k.erase("estimator.kinds");
            k.insert({"schedule.betas", "schedule.ranks"});
            break;
    }
    return k;
}

inline std::string mark_of(const std::string &file, const YAML::Mark &m) {
    return file + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
}

template <typename T>
T read_scalar(const YAML::Node &n, const std::string &key, const std::string &where) {
    if (!n.IsScalar()) throw ConfigError(where, key + ": expected a scalar");
    const std::string text = n.Scalar();
    if constexpr (std::is_unsigned_v<T>) {
        if (!text.empty() && text.front() == '-') throw ConfigError(where, key + ": must not be negative");
    }
    try {
        T value = n.as<T>();
        if constexpr (std::is_floating_point_v<T>) {
            if (!std::isfinite(value)) throw ConfigError(where, key + ": must be finite");
        }
        return value;
    } catch (const YAML::BadConversion &) {
        throw ConfigError(where, key + ": cannot read '" + text + "' as " +
                                     (std::is_floating_point_v<T> ? "a number" : "an integer"));
    }
}

template <typename T>
std::vector<T> read_list(const YAML::Node &n, const std::string &key, const std::string &file) {
    if (!n.IsSequence()) throw ConfigError(mark_of(file, n.Mark()), key + ": expected a list");
    std::vector<T> out;
    for (const auto &item : n) out.push_back(read_scalar<T>(item, key, mark_of(file, item.Mark())));
    return out;
}

inline std::vector<EstimatorKind> read_kinds(const YAML::Node &n, const std::string &file) {
    std::vector<EstimatorKind> out;
    const auto add = [&](const YAML::Node &item) {
        if (!item.IsScalar()) throw ConfigError(mark_of(file, item.Mark()), "estimator.kinds: expected a kind name");
        const auto k = parse_kind(item.Scalar());
        if (!k) {
            throw ConfigError(mark_of(file, item.Mark()),
                              "estimator.kinds: unknown kind '" + item.Scalar() + "' (HTQT, LTQT, LR_HTQT, LR_LTQT)");
        }
        out.push_back(*k);
    };
    if (n.IsSequence()) {
        for (const auto &item : n) add(item);
    } else {
        add(n);
    }
    return out;
}

}  // namespace detail

/// Applies a parsed YAML document on top of `cfg`. `file` labels messages.
inline void apply_yaml(ExperimentConfig &cfg, const YAML::Node &root, const std::string &file) {
    using detail::mark_of;
    if (!root || root.IsNull()) return;
    if (!root.IsMap()) throw ConfigError(mark_of(file, root.Mark()), "top level must be a mapping");
    const auto allowed = detail::allowed_keys(cfg.command);
    const std::string cmd(command_name(cfg.command));

    for (const auto &section : root) {
        const std::string name = section.first.as<std::string>();
        const std::string at = mark_of(file, section.first.Mark());
        if (name == "command") {
            const std::string value = section.second.IsScalar() ? section.second.Scalar() : "";
            if (value != cmd) {
                throw ConfigError(mark_of(file, section.second.Mark()),
                                  "command '" + value + "' does not match subcommand '" + cmd + "'");
            }
            continue;
        }
        static const std::set<std::string> sections = {"model", "estimator", "schedule", "ensemble", "output"};
        if (!sections.contains(name)) throw ConfigError(at, "unknown section '" + name + "'");
        if (section.second.IsNull()) continue;
        if (!section.second.IsMap()) throw ConfigError(mark_of(file, section.second.Mark()), name + ": expected a mapping");

        for (const auto &entry : section.second) {
            const std::string key = name + "." + entry.first.as<std::string>();
            const std::string kat = mark_of(file, entry.first.Mark());
            const YAML::Node &v = entry.second;
            const std::string vat = mark_of(file, v.Mark());
            bool known = false;
            for (auto c : kAllCommands) known = known || detail::allowed_keys(c).contains(key);
            if (!known) throw ConfigError(kat, "unknown key '" + key + "'");
            if (!allowed.contains(key)) throw ConfigError(kat, "key '" + key + "' does not apply to " + cmd);
            cfg.origin[key] = vat;

            if (key == "model.L") cfg.model.L = detail::read_scalar<int>(v, key, vat);
            else if (key == "model.delta") cfg.model.delta = detail::read_scalar<double>(v, key, vat);
            else if (key == "model.total_sz") cfg.model.total_sz = detail::read_scalar<double>(v, key, vat);
            else if (key == "model.delta_final") cfg.model.delta_final = detail::read_scalar<double>(v, key, vat);
            else if (key == "estimator.kinds") cfg.estimator.kinds = detail::read_kinds(v, file);
            else if (key == "estimator.rank") cfg.estimator.rank = detail::read_scalar<Index>(v, key, vat);
            else if (key == "estimator.samples") cfg.estimator.samples = detail::read_scalar<Index>(v, key, vat);
            else if (key == "schedule.tmin") cfg.schedule.tmin = detail::read_scalar<double>(v, key, vat);
            else if (key == "schedule.tmax") cfg.schedule.tmax = detail::read_scalar<double>(v, key, vat);
            else if (key == "schedule.tpoints") cfg.schedule.tpoints = detail::read_scalar<int>(v, key, vat);
            else if (key == "schedule.temperatures") cfg.schedule.temperatures = detail::read_list<double>(v, key, file);
            else if (key == "schedule.beta") cfg.schedule.beta = detail::read_scalar<double>(v, key, vat);
            else if (key == "schedule.ranks") cfg.schedule.ranks = detail::read_list<Index>(v, key, file);
            else if (key == "schedule.samples_per_rank") cfg.schedule.samples_per_rank = detail::read_scalar<Index>(v, key, vat);
            else if (key == "schedule.t_max") cfg.schedule.t_max = detail::read_scalar<double>(v, key, vat);
            else if (key == "schedule.t_step") cfg.schedule.t_step = detail::read_scalar<double>(v, key, vat);
            else if (key == "schedule.betas") cfg.schedule.betas = detail::read_list<double>(v, key, file);
            else if (key == "ensemble.n_realizations") cfg.ensemble.n_realizations = detail::read_scalar<std::uint64_t>(v, key, vat);
            else if (key == "ensemble.seed") cfg.ensemble.seed = detail::read_scalar<std::uint64_t>(v, key, vat);
            else if (key == "ensemble.threads") cfg.ensemble.threads = detail::read_scalar<unsigned>(v, key, vat);
            else if (key == "output.directory") cfg.output.directory = detail::read_scalar<std::string>(v, key, vat);
            else if (key == "output.format") cfg.output.format = detail::read_scalar<std::string>(v, key, vat);
        }
    }
}

inline void apply_yaml_text(ExperimentConfig &cfg, const std::string &text, const std::string &label) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException &e) {
        throw ConfigError(detail::mark_of(label, e.mark), e.msg);
    }
    apply_yaml(cfg, root, label);
}

inline void apply_yaml_file(ExperimentConfig &cfg, const std::string &path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::BadFile &) {
        throw ConfigError(path, "cannot open config file");
    } catch (const YAML::ParserException &e) {
        throw ConfigError(detail::mark_of(path, e.mark), e.msg);
    }
    apply_yaml(cfg, root, path);
}

/// Fills values that depend on other settings; call after all overrides.
inline void resolve(ExperimentConfig &cfg) {
    if (cfg.command == Command::traceerr && cfg.schedule.ranks.empty()) {
        const Index quarter = sector_dimension(cfg.model.L, cfg.model.total_sz) / 4;
        for (Index r = 1; r <= quarter; r *= 2) cfg.schedule.ranks.push_back(r);
        if (cfg.schedule.ranks.empty() || cfg.schedule.ranks.back() != quarter) {
            if (quarter >= 1) cfg.schedule.ranks.push_back(quarter);
        }
    }
}

/// Checks every value against the library's preconditions.
inline void validate(const ExperimentConfig &cfg) {
    const auto fail = [&](const std::string &key, const std::string &msg) { throw ConfigError(cfg.where(key), msg); };
    const Command c = cfg.command;
    const auto &m = cfg.model;
    if (m.L < 3 || m.L > 62) fail("model.L", "model.L must be in [3, 62] (got " + std::to_string(m.L) + ")");
    const double twice_up = m.L + 2.0 * m.total_sz;
    if (std::abs(twice_up - std::round(twice_up)) > 1e-9 || std::llround(twice_up) % 2 != 0 ||
        std::abs(m.total_sz) > 0.5 * m.L) {
        fail("model.total_sz", "model.total_sz must satisfy |total_sz| <= L/2 with L/2 + total_sz integral");
    }
    const Index dim = sector_dimension(m.L, m.total_sz);
    if (dim > kDenseDiagonalizationCap) {
        fail("model.L", "sector dimension " + std::to_string(dim) + " exceeds the dense diagonalization cap " +
                            std::to_string(kDenseDiagonalizationCap));
    }
    if (dim < 2) fail("model.total_sz", "sector must contain at least 2 states");

    if (c != Command::traceerr) {
        if (cfg.estimator.kinds.empty()) fail("estimator.kinds", "estimator.kinds must not be empty");
        std::set<EstimatorKind> seen(cfg.estimator.kinds.begin(), cfg.estimator.kinds.end());
        if (seen.size() != cfg.estimator.kinds.size()) fail("estimator.kinds", "estimator.kinds has duplicates");
    }
    const bool uses_rank = c == Command::static_sweep || c == Command::varsweep || c == Command::quench;
    if (uses_rank) {
        if (cfg.estimator.rank < 1 || cfg.estimator.rank > dim) {
            fail("estimator.rank", "estimator.rank must be in [1, " + std::to_string(dim) + "]");
        }
        if (cfg.estimator.samples < 1) fail("estimator.samples", "estimator.samples must be >= 1");
    }
    if (c == Command::static_sweep || c == Command::varsweep) {
        const auto &s = cfg.schedule;
        if (s.temperatures.empty()) {
            if (!(s.tmin > 0.0)) fail("schedule.tmin", "schedule.tmin must be > 0");
            if (!(s.tmax >= s.tmin)) fail("schedule.tmax", "schedule.tmax must be >= schedule.tmin");
            if (s.tpoints < 1) fail("schedule.tpoints", "schedule.tpoints must be >= 1");
            if (s.tpoints == 1 && s.tmax != s.tmin) fail("schedule.tpoints", "a single point needs tmin == tmax");
            if (s.tpoints > 1 && s.tmax == s.tmin) fail("schedule.tpoints", "several points need tmax > tmin");
        } else {
            for (std::size_t i = 0; i < s.temperatures.size(); ++i) {
                if (!(s.temperatures[i] > 0.0)) fail("schedule.temperatures", "schedule.temperatures must be > 0");
                if (i && !(s.temperatures[i] > s.temperatures[i - 1])) {
                    fail("schedule.temperatures", "schedule.temperatures must be strictly ascending");
                }
            }
        }
    }
    if (c == Command::rsweep || c == Command::quench) {
        if (!(cfg.schedule.beta >= 0.0)) fail("schedule.beta", "schedule.beta must be >= 0");
    }
    if (c == Command::rsweep || c == Command::traceerr) {
        const auto &r = cfg.schedule.ranks;
        if (r.empty()) fail("schedule.ranks", "schedule.ranks must not be empty");
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (r[i] < 1 || r[i] > dim) fail("schedule.ranks", "schedule.ranks must lie in [1, " + std::to_string(dim) + "]");
            if (i && !(r[i] > r[i - 1])) fail("schedule.ranks", "schedule.ranks must be strictly ascending");
        }
    }
    if (c == Command::rsweep) {
        if (cfg.schedule.samples_per_rank < 1) fail("schedule.samples_per_rank", "schedule.samples_per_rank must be >= 1");
        if (cfg.schedule.ranks.size() < 3) fail("schedule.ranks", "rsweep fits slopes and needs at least 3 ranks");
    }
    if (c == Command::quench) {
        if (!(cfg.schedule.t_step > 0.0)) fail("schedule.t_step", "schedule.t_step must be > 0");
        if (!(cfg.schedule.t_max >= 0.0)) fail("schedule.t_max", "schedule.t_max must be >= 0");
        if (cfg.schedule.t_max / cfg.schedule.t_step > 1e6) fail("schedule.t_step", "time grid exceeds 1e6 points");
    }
    if (c == Command::traceerr) {
        const auto &b = cfg.schedule.betas;
        if (b.empty()) fail("schedule.betas", "schedule.betas must not be empty");
        for (std::size_t i = 0; i < b.size(); ++i) {
            if (!(b[i] >= 0.0)) fail("schedule.betas", "schedule.betas must be >= 0");
            if (i && !(b[i] > b[i - 1])) fail("schedule.betas", "schedule.betas must be strictly ascending");
        }
    }
    if (cfg.ensemble.n_realizations < 2) fail("ensemble.n_realizations", "ensemble.n_realizations must be >= 2");
    if (cfg.output.format != "csv") fail("output.format", "output.format must be 'csv'");
    if (cfg.output.directory.empty()) fail("output.directory", "output.directory must not be empty");
}

/// Every setting that affects results, with sorted keys. Threads and the
/// output location are left out.
inline nlohmann::json canonical_json(const ExperimentConfig &cfg) {
    nlohmann::json j;
    const Command c = cfg.command;
    j["command"] = std::string(command_name(c));
    j["model"] = {{"L", cfg.model.L}, {"delta", cfg.model.delta}, {"total_sz", cfg.model.total_sz}};
    if (c == Command::quench) j["model"]["delta_final"] = cfg.model.delta_final;
    if (c != Command::traceerr) {
        std::vector<std::string> kinds;
        for (auto k : cfg.estimator.kinds) kinds.emplace_back(to_string(k));
        j["estimator"]["kinds"] = kinds;
    }
    if (c == Command::static_sweep || c == Command::varsweep || c == Command::quench) {
        j["estimator"]["rank"] = cfg.estimator.rank;
        j["estimator"]["samples"] = cfg.estimator.samples;
    }
    auto &s = j["schedule"];
    switch (c) {
        case Command::static_sweep:
        case Command::varsweep:
            s["temperatures"] = cfg.temperature_grid();
            break;
        case Command::rsweep:
            s["beta"] = cfg.schedule.beta;
            s["ranks"] = cfg.schedule.ranks;
            s["samples_per_rank"] = cfg.schedule.samples_per_rank;
            break;
        case Command::quench:
            s["beta"] = cfg.schedule.beta;
            s["t_max"] = cfg.schedule.t_max;
            s["t_step"] = cfg.schedule.t_step;
            break;
        case Command::traceerr:
            s["betas"] = cfg.schedule.betas;
            s["ranks"] = cfg.schedule.ranks;
            break;
    }
    j["ensemble"] = {{"n_realizations", cfg.ensemble.n_realizations}, {"seed", cfg.ensemble.seed}};
    return j;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string config_hash(const ExperimentConfig &cfg) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical_json(cfg).dump())));
    return buf;
}

}  // namespace lrqt::app
