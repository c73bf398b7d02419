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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "lrqt/types.hpp"

namespace lrqt {

/// Statistics across independent realizations of a full estimator.
struct EnsembleStats {
    Index n_realizations = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased (n - 1)
    double std_error = 0.0; // sqrt(variance / n)
};

/// Two-pass mean and unbiased variance. Summation runs in index order, so
/// the result depends only on the values, not on how they were produced.
inline EnsembleStats summarize(std::span<const double> values) {
    EnsembleStats s;
    s.n_realizations = static_cast<Index>(values.size());
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.variance = ss / static_cast<double>(values.size() - 1);
    }
    s.std_error = std::sqrt(s.variance / static_cast<double>(values.size()));
    return s;
}

/// Standard error of the unbiased sample variance, from the fourth central
/// moment: Var(s^2) ~ (m4 - (n - 3) / (n - 1) * s^4) / n.
inline double variance_std_error(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 4) return std::numeric_limits<double>::quiet_NaN();
    const EnsembleStats s = summarize(values);
    double m4 = 0.0;
    for (double v : values) m4 += std::pow(v - s.mean, 4);
    m4 /= static_cast<double>(n);
    const double nd = static_cast<double>(n);
    const double var_s2 = (m4 - (nd - 3.0) / (nd - 1.0) * s.variance * s.variance) / nd;
    return std::sqrt(std::max(var_s2, 0.0));
}

class RealizationFailure : public Error {
  public:
    RealizationFailure(std::uint64_t index, const std::string &what)
        : Error("realization " + std::to_string(index) + " failed: " + what), index_(index) {}
    std::uint64_t index() const { return index_; }

  private:
    std::uint64_t index_;
};

/// raw[k] holds realization k's outputs; stats[j] summarizes output j.
struct EnsembleResult {
    std::vector<EnsembleStats> stats;
    std::vector<std::vector<double>> raw;

    /// Values of output j across realizations, in realization order.
    std::vector<double> column(std::size_t j) const {
        std::vector<double> out;
        out.reserve(raw.size());
        for (const auto &row : raw) out.push_back(row[j]);
        return out;
    }
};

/// Experiment signature: (seed, realization index) -> one value per output.
using VectorExperiment = std::function<std::vector<double>(std::uint64_t, std::uint64_t)>;

/// Runs realizations 0..n-1, optionally on several threads. Results are
/// slotted by index, so the outcome is independent of completion order.
inline EnsembleResult run_ensemble(const VectorExperiment &experiment, std::uint64_t n, std::uint64_t seed,
                                   unsigned threads = 1) {
    if (n < 2) throw InvalidArgument("run_ensemble: need at least 2 realizations");
    std::vector<std::vector<double>> raw(n);
    std::atomic<std::uint64_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::uint64_t failed_index = n;
    std::string failure;

    auto worker = [&] {
        for (;;) {
            const std::uint64_t k = next.fetch_add(1);
            if (k >= n || failed.load()) return;
            try {
                raw[k] = experiment(seed, k);
            } catch (const std::exception &e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                failed = true;
                if (k < failed_index) {
                    failed_index = k;
                    failure = e.what();
                }
            }
        }
    };
    threads = std::max(1U, threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    }
    if (failed) throw RealizationFailure(failed_index, failure);

    EnsembleResult result;
    const std::size_t width = raw.front().size();
    for (std::uint64_t k = 0; k < n; ++k) {
        if (raw[k].size() != width) {
            throw RealizationFailure(k, "returned " + std::to_string(raw[k].size()) + " outputs, expected " +
                                            std::to_string(width));
        }
    }
    result.raw = std::move(raw);
    for (std::size_t j = 0; j < width; ++j) {
        const auto col = result.column(j);
        result.stats.push_back(summarize(col));
    }
    return result;
}

/// Scalar experiments: (seed, realization index) -> value.
inline EnsembleResult run_ensemble(const std::function<double(std::uint64_t, std::uint64_t)> &experiment,
                                   std::uint64_t n, std::uint64_t seed, unsigned threads = 1) {
    return run_ensemble(VectorExperiment([&](std::uint64_t s, std::uint64_t k) { return std::vector<double>{experiment(s, k)}; }),
                        n, seed, threads);
}

struct PowerLawFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Least-squares line through (log x, log y).
inline PowerLawFit fit_power_law(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw InvalidArgument("fit_power_law: xs and ys differ in length");
    if (xs.size() < 3) throw InvalidArgument("fit_power_law: need at least 3 points");
    const std::size_t n = xs.size();
    double mx = 0.0, my = 0.0;
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw InvalidArgument("fit_power_law: inputs must be positive");
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) throw InvalidArgument("fit_power_law: xs must not all be equal");
    PowerLawFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

}  // namespace lrqt
