#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <thread>
#include <unordered_map>
#include <vector>

#include "archive.hpp"
#include "cell.hpp"
#include "env.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "selector.hpp"

namespace goexplore {

struct ExploreConfig {
    // Exploration frames per rollout.
    std::uint64_t k = 100;
    double repeat_p = 0.95;
    std::size_t batch = 100;
    // Total exploration budget in training frames, checked between iterations.
    std::uint64_t budget_frames = 0;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    // Metric rows every this many game frames.
    std::uint64_t metric_interval = 4'000'000;
    // Return by replaying the stored actions from reset instead of restoring
    // the snapshot. Slower; results are identical.
    bool replay_return = false;

    void validate() const
    {
        if (k < 1)
            throw ConfigError("explore.k", "must be >= 1");
        if (!(repeat_p >= 0.0 && repeat_p < 1.0))
            throw ConfigError("explore.repeat_p", "must be in [0, 1)");
        if (batch < 1)
            throw ConfigError("explore.batch", "must be >= 1");
        if (workers < 1)
            throw ConfigError("explore.workers", "must be >= 1");
        if (metric_interval < 1)
            throw ConfigError("explore.metric_interval", "must be >= 1");
    }
};

struct Visit {
    CellKey key;
    double score = 0.0;
    // Number of rollout actions taken when the cell was entered (1-based).
    std::uint64_t step = 0;
    // Only captured when the visit could add or improve a cell.
    std::optional<EnvSnapshot> snapshot;
    int level = -1;
    int room = -1;
};

struct RolloutResult {
    std::size_t origin = 0;
    // The origin's trajectory when the rollout started. An earlier rollout of
    // the same batch may improve the origin before this one is merged.
    Trajectory origin_trajectory;
    std::vector<ActionId> actions;
    std::vector<Visit> visits;
    std::uint64_t frames = 0;
    bool terminated = false;
};

// Returns `env` to the state of archive record `origin`.
inline void go_to(Environment& env, const Archive& archive, std::size_t origin, bool replay)
{
    const auto& rec = archive.record_at(origin);
    if (!replay) {
        env.restore(rec.snapshot);
        return;
    }
    env.reset(0);
    for (auto a : archive.materialize(rec)) {
        if (env.done())
            throw IntegrityError("replay return: episode ended before the trajectory did");
        env.step(a);
    }
}

// Random exploration from `origin`. The first action is a uniform draw; after
// that each frame repeats the previous action with probability repeat_p and
// otherwise draws uniformly. A step that ends the episode consumes its frame
// but yields no visit.
inline RolloutResult explore_from(Environment& env, const Archive& archive, std::size_t origin,
                                  const CellRepresentation& repr, Rng& rng, const ExploreConfig& cfg)
{
    go_to(env, archive, origin, cfg.replay_return);
    const auto& rec = archive.record_at(origin);
    RolloutResult out;
    out.origin = origin;
    out.origin_trajectory = rec.trajectory;
    out.actions.reserve(static_cast<std::size_t>(cfg.k));
    std::unordered_map<CellKey, std::pair<double, std::uint64_t>, CellKeyHash> best_here;
    const auto num_actions = static_cast<std::uint64_t>(env.num_actions());
    std::optional<ActionId> prev;
    for (std::uint64_t t = 0; t < cfg.k; ++t) {
        ActionId a;
        if (prev && rng.uniform() < cfg.repeat_p)
            a = *prev;
        else
            a = static_cast<ActionId>(rng.below(num_actions));
        prev = a;
        auto r = env.step(a);
        ++out.frames;
        if (r.done) {
            out.terminated = true;
            break;
        }
        out.actions.push_back(a);
        Visit v;
        v.key = repr(r.obs);
        v.score = env.score();
        v.step = t + 1;
        v.level = r.info.level;
        v.room = r.info.room;
        const std::uint64_t len = rec.traj_len + v.step;
        if (archive.classify(v.key, v.score, len) != UpdateOutcome::Unchanged) {
            auto it = best_here.find(v.key);
            if (it == best_here.end() || improves(v.score, len, it->second.first, it->second.second)) {
                v.snapshot = env.snapshot();
                best_here[v.key] = {v.score, len};
            }
        }
        out.visits.push_back(std::move(v));
    }
    return out;
}

struct MergeStats {
    std::size_t added = 0;
    std::size_t improved = 0;
};

// Folds one rollout into the archive. Trajectory nodes are created only up to
// the last visit that changes the archive.
inline MergeStats merge_rollout(Archive& archive, const RolloutResult& r, bool credit_origin = true)
{
    MergeStats stats;
    Trajectory chain = r.origin_trajectory;
    std::uint64_t built = 0;
    for (const auto& v : r.visits) {
        const std::uint64_t len = r.origin_trajectory.length + v.step;
        const auto outcome = v.snapshot ? archive.classify(v.key, v.score, len) : UpdateOutcome::Unchanged;
        if (outcome == UpdateOutcome::Unchanged) {
            archive.mark_seen(v.key);
            continue;
        }
        for (; built < v.step; ++built)
            chain = archive.trajectories().extend(chain, r.actions[static_cast<std::size_t>(built)]);
        archive.insert_or_update(v.key, {chain, v.score, len, *v.snapshot, v.level, v.room});
        ++(outcome == UpdateOutcome::Added ? stats.added : stats.improved);
    }
    if (credit_origin && stats.added + stats.improved > 0)
        archive.credit_discovery(r.origin);
    return stats;
}

struct IterationStats {
    std::uint64_t iteration = 0;
    std::uint64_t frames = 0;
    std::size_t added = 0;
    std::size_t improved = 0;
};

// Runs fn(i, worker) for i in [0, n) on `workers` threads. Each worker index
// is used by one thread only.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t, unsigned)>& fn)
{
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i, 0);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> threads;
        for (unsigned w = 0; w < workers; ++w)
            threads.emplace_back([&, w] {
                try {
                    for (std::size_t i = next++; i < n; i = next++)
                        fn(i, w);
                }
                catch (...) {
                    errors[w] = std::current_exception();
                }
            });
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

// The Phase 1 loop: select a batch, return to each chosen cell, explore from
// it, merge the rollouts in index order.
//
// In baseline mode every rollout starts from the initial state and the
// archive is only a record of what was found; it never drives selection.
class Explorer {
public:
    Explorer(EnvFactory factory, CellRepresentation repr, SelectionConfig selection, ExploreConfig cfg,
             bool baseline = false)
        : _factory(std::move(factory)), _repr(repr), _selection(selection), _cfg(cfg), _baseline(baseline)
    {
        _repr.validate();
        _selection.validate();
        _cfg.validate();
        for (unsigned w = 0; w < _cfg.workers; ++w) {
            _envs.push_back(_factory());
            _envs.back()->set_render_frames(!_repr.domain());
        }
        auto first = _envs.front()->reset(0);
        _archive = Archive(_envs.front()->config_hash(), _repr.hash());
        Candidate c;
        c.snapshot = first.snapshot;
        if (first.obs.features) {
            c.level = first.obs.features->level;
            c.room = first.obs.features->room;
        }
        _archive.insert_or_update(_repr(first.obs), c);
        _start = std::chrono::steady_clock::now();
    }

    // Continues from a checkpoint written by this class.
    void resume(Archive archive)
    {
        if (archive.config_hash() != _archive.config_hash())
            throw FormatError("resume: checkpoint belongs to a different environment or representation");
        ByteReader r(archive.extension(), "explorer state");
        r.expect_raw("GEXS");
        const auto seed = r.get<std::uint64_t>();
        if (seed != _cfg.seed)
            throw ConfigError("explore.seed", "differs from the checkpoint's seed " + std::to_string(seed));
        const bool baseline = r.get<std::uint8_t>() != 0;
        if (baseline != _baseline)
            throw FormatError("resume: checkpoint mode differs");
        _iteration = r.get<std::uint64_t>();
        _frames = r.get<std::uint64_t>();
        _next_metric = r.get<std::uint64_t>();
        _archive = std::move(archive);
    }

    const Archive& archive() const noexcept { return _archive; }
    Archive& archive() noexcept { return _archive; }
    std::uint64_t iteration() const noexcept { return _iteration; }
    std::uint64_t training_frames() const noexcept { return _frames; }
    std::uint64_t game_frames() const { return _frames * static_cast<std::uint64_t>(_envs.front()->frame_skip()); }
    const ExploreConfig& config() const noexcept { return _cfg; }

    MetricRow metrics() const
    {
        MetricRow m;
        m.training_frames = _frames;
        m.game_frames = game_frames();
        m.cells = _archive.size();
        m.rooms = _archive.rooms();
        m.max_score = _archive.max_score();
        m.max_level = _archive.max_level();
        m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - _start).count();
        return m;
    }

    // Archive with the resume state embedded.
    Archive checkpoint() const
    {
        Archive a = _archive;
        ByteWriter w;
        w.put_raw("GEXS");
        w.put(_cfg.seed);
        w.put(static_cast<std::uint8_t>(_baseline));
        w.put(_iteration);
        w.put(_frames);
        w.put(_next_metric);
        a.extension() = std::move(w).bytes();
        return a;
    }

    IterationStats run_iteration()
    {
        IterationStats stats;
        stats.iteration = _iteration;
        const std::size_t b = _cfg.batch;
        std::vector<std::size_t> origins(b, 0);
        if (!_baseline) {
            // One probability computation per batch; every cell in the batch
            // sees the same max_level.
            auto probs = cell_probs(_archive, _selection);
            Rng srng(derive_seed(_cfg.seed, {_iteration, stream::select}));
            origins = sample_batch(probs, b, srng);
            for (auto o : origins)
                _archive.record_chosen(o);
        }
        std::vector<RolloutResult> results(b);
        parallel_for(b, _cfg.workers, [&](std::size_t i, unsigned w) {
            Rng rng(derive_seed(_cfg.seed, {_iteration, static_cast<std::uint64_t>(i), stream::rollout}));
            results[i] = explore_from(*_envs[w], _archive, origins[i], _repr, rng, _cfg);
        });
        for (const auto& r : results) {
            auto m = merge_rollout(_archive, r, !_baseline);
            stats.added += m.added;
            stats.improved += m.improved;
            stats.frames += r.frames;
        }
        _frames += stats.frames;
        ++_iteration;
        return stats;
    }

    bool budget_left() const { return _frames < _cfg.budget_frames; }

    // Iterates until the budget is spent. A metric row is emitted before the
    // first iteration and whenever game frames cross a multiple of
    // metric_interval; on_iteration may return false to stop early.
    void run(const std::function<void(const MetricRow&)>& on_metric = {},
             const std::function<bool(const IterationStats&)>& on_iteration = {})
    {
        maybe_emit(on_metric);
        while (budget_left()) {
            auto s = run_iteration();
            maybe_emit(on_metric);
            if (on_iteration && !on_iteration(s))
                break;
        }
    }

private:
    void maybe_emit(const std::function<void(const MetricRow&)>& on_metric)
    {
        const auto g = game_frames();
        if (g < _next_metric)
            return;
        if (on_metric)
            on_metric(metrics());
        while (_next_metric <= g)
            _next_metric += _cfg.metric_interval;
    }

    EnvFactory _factory;
    CellRepresentation _repr;
    SelectionConfig _selection;
    ExploreConfig _cfg;
    bool _baseline;
    std::vector<std::unique_ptr<Environment>> _envs;
    Archive _archive;
    std::uint64_t _iteration = 0;
    std::uint64_t _frames = 0;
    std::uint64_t _next_metric = 0;
    std::chrono::steady_clock::time_point _start;
};

struct Phase1Result {
    Archive archive;
    std::vector<MetricRow> metrics;
};

inline Phase1Result run_phase1(const EnvFactory& factory, const CellRepresentation& repr,
                               const SelectionConfig& selection, const ExploreConfig& cfg)
{
    Explorer ex(factory, repr, selection, cfg);
    Phase1Result out;
    ex.run([&](const MetricRow& m) { out.metrics.push_back(m); });
    out.archive = ex.checkpoint();
    return out;
}

inline Phase1Result baseline_from_start(const EnvFactory& factory, const CellRepresentation& repr,
                                        const ExploreConfig& cfg)
{
    Explorer ex(factory, repr, SelectionConfig{}, cfg, true);
    Phase1Result out;
    ex.run([&](const MetricRow& m) { out.metrics.push_back(m); });
    out.archive = ex.checkpoint();
    return out;
}

struct ReplayOutcome {
    double score = 0.0;
    CellKey key;
    EnvSnapshot snapshot;
};

// Replays `actions` from reset on a deterministic environment.
inline ReplayOutcome replay_actions(Environment& env, const std::vector<ActionId>& actions,
                                    const CellRepresentation& repr)
{
    env.set_render_frames(!repr.domain());
    auto first = env.reset(0);
    Observation obs = first.obs;
    for (auto a : actions) {
        if (env.done())
            throw IntegrityError("replay: episode ended before the trajectory did");
        obs = env.step(a).obs;
    }
    return {env.score(), repr(obs), env.snapshot()};
}

// Throws IntegrityError unless replaying record i reproduces its score, cell
// key and snapshot exactly.
inline void verify_record(Environment& env, const Archive& archive, std::size_t i, const CellRepresentation& repr)
{
    const auto& rec = archive.record_at(i);
    const auto actions = archive.materialize(rec);
    auto out = replay_actions(env, actions, repr);
    const auto& key = archive.key_at(i);
    if (out.score != rec.score)
        throw IntegrityError("replay of " + key.to_string() + ": score " + format_double(out.score) +
                             " != stored " + format_double(rec.score));
    if (!(out.key == key))
        throw IntegrityError("replay of " + key.to_string() + " ends in cell " + out.key.to_string());
    if (out.snapshot.serialize() != rec.snapshot.serialize())
        throw IntegrityError("replay of " + key.to_string() + ": final state differs from stored snapshot");
}

} // namespace goexplore
