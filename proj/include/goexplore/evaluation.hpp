#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "env.hpp"
#include "errors.hpp"
#include "explorer.hpp"
#include "learners.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "wrappers.hpp"

namespace goexplore {

struct EvalProtocol {
    int max_noops = 30;
    int episodes = 5;
    double sticky_p = 0.25;
    std::uint64_t time_limit = 400'000;
    std::uint64_t seed = 0;
    unsigned workers = 1;

    void validate() const
    {
        if (max_noops < 0)
            throw ConfigError("eval.max_noops", "must be >= 0");
        if (episodes < 1)
            throw ConfigError("eval.episodes", "must be >= 1");
        if (!(sticky_p >= 0.0 && sticky_p < 1.0))
            throw ConfigError("eval.sticky_p", "must be in [0, 1)");
        if (time_limit < 1)
            throw ConfigError("eval.time_limit", "must be >= 1");
        if (workers < 1)
            throw ConfigError("eval.workers", "must be >= 1");
    }
};

struct EvalResult {
    double grand_mean = 0.0;
    std::vector<double> per_noop;
    // scores[n][e]: episode e started with exactly n no-ops.
    std::vector<std::vector<double>> scores;
};

inline double mean(std::span<const double> xs)
{
    if (xs.empty())
        throw ContractViolation("mean of an empty sample");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Mean of the per-no-op means, so every no-op count weighs the same however
// many episodes it has.
inline double grand_mean(const std::vector<std::vector<double>>& scores, std::vector<double>* per_noop = nullptr)
{
    if (scores.empty())
        throw ContractViolation("grand_mean: no score groups");
    std::vector<double> means;
    for (std::size_t n = 0; n < scores.size(); ++n) {
        if (scores[n].empty())
            throw ContractViolation("grand_mean: no episodes for no-op count " + std::to_string(n));
        means.push_back(mean(scores[n]));
    }
    const double g = mean(means);
    if (per_noop)
        *per_noop = std::move(means);
    return g;
}

inline std::uint64_t eval_episode_seed(std::uint64_t seed, int noops, int episode)
{
    return derive_seed(seed, {stream::eval, static_cast<std::uint64_t>(noops), static_cast<std::uint64_t>(episode)});
}

// One greedy episode with exactly `noops` forced no-ops and sticky actions.
inline double run_eval_episode(const Learner& policy, const EnvFactory& base, const EvalProtocol& p, int noops,
                               int episode)
{
    auto inner = wrap_sticky(base(), p.sticky_p);
    RandomNoops env(std::move(inner), p.max_noops);
    env.set_render_frames(false);
    env.force_noops(noops);
    const auto seed = eval_episode_seed(p.seed, noops, episode);
    auto obs = env.reset(seed).obs;
    Rng rng(derive_seed(seed, {stream::rollout}));
    std::uint64_t t = 0;
    while (!env.done() && env.frame_counters().game_frames < p.time_limit) {
        const auto a = policy.act({env.state_id(), &obs, t, std::nullopt, env.num_actions()}, rng, false);
        obs = env.step(a).obs;
        ++t;
    }
    return env.score();
}

// Runs `episodes` episodes for each no-op count 0..max_noops.
inline EvalResult evaluate_policy(const Learner& policy, const EnvFactory& base, const EvalProtocol& p)
{
    p.validate();
    const int groups = p.max_noops + 1;
    EvalResult out;
    out.scores.assign(static_cast<std::size_t>(groups), std::vector<double>(static_cast<std::size_t>(p.episodes)));
    const auto total = static_cast<std::size_t>(groups * p.episodes);
    parallel_for(total, p.workers, [&](std::size_t i, unsigned) {
        const int n = static_cast<int>(i) / p.episodes, e = static_cast<int>(i) % p.episodes;
        out.scores[static_cast<std::size_t>(n)][static_cast<std::size_t>(e)] = run_eval_episode(policy, base, p, n, e);
    });
    out.grand_mean = grand_mean(out.scores, &out.per_noop);
    return out;
}

// Empirical quantile of sorted data: linear interpolation at rank (n-1)q.
inline double quantile_sorted(std::span<const double> sorted, double q)
{
    if (sorted.empty())
        throw ContractViolation("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0))
        throw ContractViolation("quantile: q must be in [0, 1]");
    const double rank = static_cast<double>(sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

using Statistic = std::function<double(std::span<const double>)>;

// Sorted statistics of B resamples drawn with replacement. Resample b draws
// n indices with Rng(derive_seed(seed, {bootstrap})).below(n), in order.
inline std::vector<double> bootstrap_distribution(std::span<const double> samples, std::size_t B, std::uint64_t seed,
                                                  const Statistic& statistic = {})
{
    if (B < 1)
        throw ContractViolation("bootstrap: B must be >= 1");
    Rng rng(derive_seed(seed, {stream::bootstrap}));
    const auto n = samples.size();
    std::vector<double> stats(B), buf(n);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < n; ++i)
            buf[i] = samples[static_cast<std::size_t>(rng.below(n))];
        stats[b] = statistic ? statistic(buf) : mean(buf);
    }
    std::sort(stats.begin(), stats.end());
    return stats;
}

// Pivotal ("empirical") bootstrap interval (2t - q_hi, 2t - q_lo).
inline Interval bootstrap_ci(std::span<const double> samples, std::size_t B = 10'000, double alpha = 0.05,
                             std::uint64_t seed = 0, const Statistic& statistic = {})
{
    if (samples.size() < 2)
        throw ContractViolation("bootstrap_ci: need at least 2 samples, got " + std::to_string(samples.size()));
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ContractViolation("bootstrap_ci: alpha must be in (0, 1)");
    const double theta = statistic ? statistic(samples) : mean(samples);
    const auto stats = bootstrap_distribution(samples, B, seed, statistic);
    const double q_lo = quantile_sorted(stats, alpha / 2), q_hi = quantile_sorted(stats, 1 - alpha / 2);
    return {2 * theta - q_hi, 2 * theta - q_lo};
}

// Percentile band of the mean, used for the shaded areas in reports. A
// single sample gives a band of zero width.
inline Interval percentile_band(std::span<const double> samples, std::size_t B = 1000, double alpha = 0.05,
                                std::uint64_t seed = 0)
{
    if (samples.empty())
        throw ContractViolation("percentile_band: no samples");
    const auto stats = bootstrap_distribution(samples, B, seed);
    return {quantile_sorted(stats, alpha / 2), quantile_sorted(stats, 1 - alpha / 2)};
}

// Aggregates per-seed metric CSVs that share a header. Rows are aligned by
// index up to the shortest file. For every column other than the x column
// (game_frames when present, else the first) and wall_seconds, writes
// <out_dir>/<column>.csv with columns index,x,mean,ci_lo,ci_hi,seeds. Returns
// the written paths.
inline std::vector<std::string> emit_report(const std::vector<std::string>& csv_paths, const std::string& out_dir,
                                            std::uint64_t seed = 0)
{
    if (csv_paths.empty())
        throw ContractViolation("emit_report: no input files");
    std::vector<CsvTable> tables;
    for (const auto& p : csv_paths)
        tables.push_back(load_csv(p));
    for (std::size_t i = 1; i < tables.size(); ++i)
        if (tables[i].columns != tables[0].columns)
            throw FormatError(csv_paths[i] + ":1: header differs from " + csv_paths[0]);
    const auto& cols = tables[0].columns;
    std::size_t xcol = 0;
    for (std::size_t c = 0; c < cols.size(); ++c)
        if (cols[c] == "game_frames")
            xcol = c;
    std::size_t rows = tables[0].rows.size();
    for (const auto& t : tables)
        rows = std::min(rows, t.rows.size());

    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (c == xcol || cols[c] == "wall_seconds")
            continue;
        const auto path = (std::filesystem::path(out_dir) / (cols[c] + ".csv")).string();
        std::ofstream out(path);
        if (!out)
            throw Error("emit_report: cannot write " + path);
        out << "index," << cols[xcol] << ",mean,ci_lo,ci_hi,seeds\n";
        for (std::size_t r = 0; r < rows; ++r) {
            std::vector<double> xs, ys;
            for (const auto& t : tables) {
                xs.push_back(t.rows[r][xcol]);
                ys.push_back(t.rows[r][c]);
            }
            const auto band = percentile_band(ys, 1000, 0.05, derive_seed(seed, {c, r}));
            out << r << ',' << format_double(mean(xs)) << ',' << format_double(mean(ys)) << ','
                << format_double(band.lo) << ',' << format_double(band.hi) << ',' << ys.size() << '\n';
        }
        written.push_back(path);
    }
    return written;
}

} // namespace goexplore
