#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "archive.hpp"
#include "env.hpp"
#include "errors.hpp"
#include "explorer.hpp"
#include "learners.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "wrappers.hpp"

namespace goexplore {

struct Demonstration {
    std::vector<ActionId> actions;
    // cum_rewards[t] is the score after t frames; size is length() + 1.
    std::vector<double> cum_rewards;
    // checkpoints[i] is the state after i * checkpoint_every frames.
    std::vector<EnvSnapshot> checkpoints;
    std::uint64_t checkpoint_every = 25;
    int level = -1;
    double score = 0.0;
    std::string source;

    std::uint64_t length() const noexcept { return actions.size(); }

    void validate() const
    {
        if (checkpoint_every < 1)
            throw ContractViolation("demonstration: checkpoint_every must be >= 1");
        if (cum_rewards.size() != actions.size() + 1)
            throw ContractViolation("demonstration: cum_rewards must hold length + 1 entries");
        if (checkpoints.size() != actions.size() / checkpoint_every + 1)
            throw ContractViolation("demonstration: checkpoint count does not match length");
        if (score != cum_rewards.back())
            throw ContractViolation("demonstration: score differs from final cumulative reward");
    }
};

// Replays `actions` from reset on a deterministic environment and records the
// cumulative score and periodic snapshots.
inline Demonstration record_demonstration(Environment& env, std::vector<ActionId> actions,
                                          std::uint64_t checkpoint_every = 25)
{
    if (checkpoint_every < 1)
        throw ContractViolation("demonstration: checkpoint_every must be >= 1");
    Demonstration d;
    d.checkpoint_every = checkpoint_every;
    env.set_render_frames(false);
    env.reset(0);
    d.cum_rewards.push_back(env.score());
    d.checkpoints.push_back(env.snapshot());
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (env.done())
            throw IntegrityError("demonstration: episode ended at frame " + std::to_string(i) + " of " +
                                 std::to_string(actions.size()));
        env.step(actions[i]);
        d.cum_rewards.push_back(env.score());
        if ((i + 1) % checkpoint_every == 0)
            d.checkpoints.push_back(env.snapshot());
    }
    d.actions = std::move(actions);
    d.score = env.score();
    d.level = env.domain_info().level;
    return d;
}

inline Demonstration demo_from_archive(Environment& env, const Archive& archive, std::size_t index,
                                       std::uint64_t checkpoint_every = 25)
{
    const auto& rec = archive.record_at(index);
    auto d = record_demonstration(env, archive.materialize(rec), checkpoint_every);
    if (d.score != rec.score)
        throw IntegrityError("demonstration from " + archive.key_at(index).to_string() + ": replay scores " +
                             format_double(d.score) + ", archive says " + format_double(rec.score));
    d.level = rec.level;
    d.source = archive.key_at(index).to_string();
    return d;
}

// State after `frame` demonstration frames: nearest stored snapshot plus
// replay on a deterministic environment.
inline EnvSnapshot snapshot_at(const Demonstration& d, std::uint64_t frame, Environment& env)
{
    if (frame > d.length())
        throw ContractViolation("demonstration: frame " + std::to_string(frame) + " beyond length " +
                                std::to_string(d.length()));
    const auto cp = frame / d.checkpoint_every;
    if (frame % d.checkpoint_every == 0)
        return d.checkpoints[static_cast<std::size_t>(cp)];
    env.restore(d.checkpoints[static_cast<std::size_t>(cp)]);
    for (auto t = cp * d.checkpoint_every; t < frame; ++t)
        env.step(d.actions[static_cast<std::size_t>(t)]);
    return env.snapshot();
}

enum class LevelFilter { MaxLevel, Any };

// The best record of each of the first n qualifying archives. With MaxLevel
// only archives reaching the highest level seen in any archive qualify, and
// only their records at that level are eligible.
inline std::vector<Demonstration> select_demonstrations(std::span<const Archive> archives, std::size_t n,
                                                        LevelFilter filter, const EnvFactory& factory,
                                                        std::uint64_t checkpoint_every = 25)
{
    if (n < 1)
        throw ContractViolation("select_demonstrations: n must be >= 1");
    int top = -1;
    for (const auto& a : archives)
        top = std::max(top, a.max_level());
    std::vector<const Archive*> qualifying;
    for (const auto& a : archives)
        if (filter == LevelFilter::Any || a.max_level() == top)
            qualifying.push_back(&a);
    if (qualifying.size() < n)
        throw ShortfallError("select_demonstrations: need " + std::to_string(n) + " demonstration(s), only " +
                             std::to_string(qualifying.size()) + " of " + std::to_string(archives.size()) +
                             " archive(s) qualify" +
                             (filter == LevelFilter::MaxLevel ? " (max level " + std::to_string(top) + ")" : ""));
    auto env = factory();
    std::vector<Demonstration> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = *qualifying[i];
        Archive::Filter f;
        if (filter == LevelFilter::MaxLevel)
            f = [top](const CellKey&, const CellRecord& r) { return r.level == top; };
        out.push_back(demo_from_archive(*env, a, a.best_index(f), checkpoint_every));
    }
    return out;
}

// Prefix of at most max_frames frames, optionally cut back further to end on
// the frame of the last strictly positive reward.
inline Demonstration truncate_demo(const Demonstration& d, std::uint64_t max_frames, bool to_last_reward)
{
    if (max_frames < 1)
        throw ContractViolation("truncate_demo: max_frames must be >= 1");
    std::uint64_t len = std::min(max_frames, d.length());
    if (to_last_reward) {
        while (len > 0 && !(d.cum_rewards[static_cast<std::size_t>(len)] > d.cum_rewards[static_cast<std::size_t>(len - 1)]))
            --len;
        if (len == 0)
            throw ContractViolation("truncate_demo: no positive reward within the first " +
                                    std::to_string(std::min(max_frames, d.length())) + " frames");
    }
    Demonstration out;
    out.checkpoint_every = d.checkpoint_every;
    out.actions.assign(d.actions.begin(), d.actions.begin() + static_cast<std::ptrdiff_t>(len));
    out.cum_rewards.assign(d.cum_rewards.begin(), d.cum_rewards.begin() + static_cast<std::ptrdiff_t>(len + 1));
    out.checkpoints.assign(d.checkpoints.begin(),
                           d.checkpoints.begin() + static_cast<std::ptrdiff_t>(len / d.checkpoint_every + 1));
    out.level = d.level;
    out.score = out.cum_rewards.back();
    out.source = d.source;
    return out;
}

enum class RewardMode { Clip, Scale };

struct RewardShaping {
    RewardMode mode = RewardMode::Clip;
    double scale = 0.001;
};

inline double shape_reward(double r, const RewardShaping& s)
{
    if (s.mode == RewardMode::Clip)
        return std::clamp(r, -1.0, 1.0);
    return r * s.scale;
}

// True once the window has elapsed and the rollout's score gained since
// `start` trails what the demonstration had gained W frames earlier by more
// than `deficit`. Both series are indexed by demonstration frame; the
// demonstration series is held at its final value past its end.
inline bool early_terminate(std::span<const double> rollout_cum, std::span<const double> demo_cum, std::uint64_t t,
                            std::uint64_t start, std::uint64_t window, double deficit)
{
    if (t < start)
        throw ContractViolation("early_terminate: t < start");
    if (t - start < window)
        return false;
    if (t >= rollout_cum.size() || start >= demo_cum.size())
        throw ContractViolation("early_terminate: series too short");
    const auto back = std::min<std::uint64_t>(t - window, demo_cum.size() - 1);
    const double got = rollout_cum[static_cast<std::size_t>(t)] - rollout_cum[static_cast<std::size_t>(start)];
    const double want = demo_cum[static_cast<std::size_t>(back)] - demo_cum[static_cast<std::size_t>(start)];
    return got < want - deficit;
}

struct BackwardConfig {
    double success_threshold = 0.1;
    // Attempts per demonstration between advance checks; 0 means 200 * nDemos.
    std::uint64_t advance_interval = 0;
    std::uint64_t start_shift = 1;
    std::uint64_t window = 50;
    double allowed_deficit = 0.0;
    RewardShaping reward;
    // Frames a rollout may run past the end of its demonstration.
    std::uint64_t horizon_slack = 50;
    double sticky_p = 0.25;
    int max_noops = 30;
    // Success rate that must hold at starting point 0 before the run stops.
    double final_success_rate = 0.1;
    std::uint64_t budget_frames = 10'000'000;
    // Attempts rolled out against one frozen policy before an update.
    std::size_t batch = 16;
    unsigned workers = 1;
    std::uint64_t seed = 0;
    // A policy checkpoint every this many attempts; 0 disables them.
    std::uint64_t checkpoint_interval = 1000;
    std::size_t keep_checkpoints = 10;

    std::uint64_t interval_for(std::size_t demos) const
    {
        return advance_interval > 0 ? advance_interval : 200 * static_cast<std::uint64_t>(demos);
    }

    void validate() const
    {
        if (!(success_threshold > 0.0 && success_threshold <= 1.0))
            throw ConfigError("robustify.success_threshold", "must be in (0, 1]");
        if (!(final_success_rate >= 0.0 && final_success_rate <= 1.0))
            throw ConfigError("robustify.final_success_rate", "must be in [0, 1]");
        if (start_shift < 1)
            throw ConfigError("robustify.start_shift", "must be >= 1");
        if (window < 1)
            throw ConfigError("robustify.window", "must be >= 1");
        if (!(allowed_deficit >= 0.0))
            throw ConfigError("robustify.allowed_deficit", "must be >= 0");
        if (reward.mode == RewardMode::Scale && !(reward.scale > 0.0))
            throw ConfigError("robustify.reward_scale", "must be > 0");
        if (!(sticky_p >= 0.0 && sticky_p < 1.0))
            throw ConfigError("robustify.sticky_p", "must be in [0, 1)");
        if (max_noops < 0)
            throw ConfigError("robustify.max_noops", "must be >= 0");
        if (batch < 1)
            throw ConfigError("robustify.batch", "must be >= 1");
        if (workers < 1)
            throw ConfigError("robustify.workers", "must be >= 1");
        if (keep_checkpoints < 1)
            throw ConfigError("robustify.keep_checkpoints", "must be >= 1");
    }
};

struct ProgressRow {
    std::uint64_t attempts = 0;
    std::uint64_t training_frames = 0;
    std::size_t demo = 0;
    std::uint64_t max_starting_point = 0;
    double success_rate = 0.0;
    // Mean unshaped final score over the success window.
    double mean_score = 0.0;

    static std::string csv_header() { return "attempts,training_frames,demo,max_starting_point,success_rate,mean_score"; }

    std::string csv() const
    {
        return std::to_string(attempts) + "," + std::to_string(training_frames) + "," + std::to_string(demo) + "," +
               std::to_string(max_starting_point) + "," + format_double(success_rate) + "," +
               format_double(mean_score);
    }

    bool operator==(const ProgressRow&) const = default;
};

struct DemoProgress {
    std::uint64_t max_starting_point = 0;
    std::deque<std::pair<bool, double>> window;
    std::uint64_t since_check = 0;
    std::uint64_t attempts = 0;
    bool held_at_zero = false;

    double success_rate() const
    {
        if (window.empty())
            return 0.0;
        double s = 0;
        for (const auto& [ok, score] : window)
            s += ok;
        return s / static_cast<double>(window.size());
    }

    double mean_score() const
    {
        if (window.empty())
            return 0.0;
        double s = 0;
        for (const auto& [ok, score] : window)
            s += score;
        return s / static_cast<double>(window.size());
    }
};

// Runs one attempt: start from `start` along the demonstration (a fresh reset
// with random no-ops when start is 0), act with exploration, stop on episode
// end, early termination or at the horizon.
inline Rollout run_attempt(Environment& env, const Demonstration& demo, std::size_t demo_index, std::uint64_t start,
                           const EnvSnapshot* start_state, const Learner& learner, const BackwardConfig& cfg,
                           std::uint64_t attempt_seed, std::vector<double>& cum)
{
    Rollout out;
    out.demo = demo_index;
    out.start = start;
    out.num_actions = env.num_actions();
    Observation obs;
    std::uint64_t frames_before = 0;
    if (start == 0) {
        obs = env.reset(attempt_seed).obs;
    }
    else {
        env.seed(attempt_seed);
        env.restore(*start_state);
        obs = env.observe();
        frames_before = env.frame_counters().training_frames;
    }
    cum.assign(demo.cum_rewards.begin(), demo.cum_rewards.begin() + static_cast<std::ptrdiff_t>(start));
    cum.push_back(env.score());
    Rng rng(derive_seed(attempt_seed, {stream::rollout}));
    const std::uint64_t horizon = demo.length() + cfg.horizon_slack;
    std::uint64_t t = start;
    while (!env.done() && t < horizon) {
        const auto s = env.state_id();
        const auto a = learner.act({s, &obs, t, demo_index, out.num_actions}, rng, true);
        auto r = env.step(a);
        obs = std::move(r.obs);
        ++t;
        out.transitions.push_back({s, a, shape_reward(r.reward, cfg.reward), env.state_id(), r.done});
        cum.push_back(env.score());
        if (!r.done && early_terminate(cum, demo.cum_rewards, t, start, cfg.window, cfg.allowed_deficit)) {
            out.early_terminated = true;
            break;
        }
    }
    out.score = env.score();
    out.success = out.score >= demo.score;
    out.frames = env.frame_counters().training_frames - frames_before;
    return out;
}

struct BackwardResult {
    std::unique_ptr<Learner> policy;
    std::vector<ProgressRow> history;
    std::vector<std::uint64_t> max_starting_points;
    std::vector<PolicyFile> checkpoints;
    std::uint64_t attempts = 0;
    std::uint64_t training_frames = 0;
    // All starting points at 0 with the final success rate held.
    bool finished = false;
};

inline std::unique_ptr<Environment> robustify_env(const EnvFactory& base, double sticky_p, int max_noops)
{
    auto env = wrap_noops(wrap_sticky(base(), sticky_p), max_noops);
    env->set_render_frames(false);
    return env;
}

// The Backward Algorithm. Attempts are numbered; attempt a picks its
// demonstration and seeds from (seed, a). A batch of attempts runs against
// one frozen policy, possibly on several threads, and the results are then
// folded in attempt order: success windows, advance checks, learner update.
// Outcomes therefore do not depend on the worker count.
//
// `base` must build the deterministic environment; sticky actions and random
// no-ops are added here.
inline BackwardResult backward_run(const std::vector<Demonstration>& demos, std::unique_ptr<Learner> learner,
                                   const EnvFactory& base, const BackwardConfig& cfg,
                                   const std::function<void(const ProgressRow&)>& on_progress = {})
{
    cfg.validate();
    if (demos.empty())
        throw ContractViolation("backward_run: no demonstrations");
    if (!learner)
        throw ContractViolation("backward_run: no learner");
    for (const auto& d : demos)
        d.validate();
    const auto interval = cfg.interval_for(demos.size());

    std::vector<std::unique_ptr<Environment>> envs;
    for (unsigned w = 0; w < cfg.workers; ++w)
        envs.push_back(robustify_env(base, cfg.sticky_p, cfg.max_noops));
    auto replay_env = base();
    replay_env->set_render_frames(false);
    std::vector<std::vector<double>> cum_buffers(cfg.workers);

    std::vector<DemoProgress> progress(demos.size());
    std::vector<EnvSnapshot> start_states(demos.size());
    std::vector<std::uint64_t> cached_start(demos.size(), std::numeric_limits<std::uint64_t>::max());
    for (std::size_t d = 0; d < demos.size(); ++d)
        progress[d].max_starting_point = demos[d].length();

    BackwardResult out;
    std::uint64_t best_sum = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t next_checkpoint = cfg.checkpoint_interval;
    auto start_sum = [&] {
        std::uint64_t s = 0;
        for (const auto& p : progress)
            s += p.max_starting_point;
        return s;
    };
    auto take_checkpoint = [&] {
        const auto sum = start_sum();
        if (sum < best_sum) {
            out.checkpoints.clear();
            best_sum = sum;
        }
        if (sum == best_sum) {
            out.checkpoints.push_back(PolicyFile::of(*learner, out.attempts, sum));
            if (out.checkpoints.size() > cfg.keep_checkpoints)
                out.checkpoints.erase(out.checkpoints.begin());
        }
    };
    auto all_held = [&] {
        return std::all_of(progress.begin(), progress.end(), [](const DemoProgress& p) { return p.held_at_zero; });
    };

    while (out.training_frames < cfg.budget_frames && !all_held()) {
        std::vector<std::size_t> demo_of(cfg.batch);
        std::vector<std::uint64_t> start_of(cfg.batch);
        for (std::size_t i = 0; i < cfg.batch; ++i) {
            const auto a = out.attempts + i;
            Rng pick(derive_seed(cfg.seed, {a, stream::backward, stream::select}));
            const auto d = static_cast<std::size_t>(pick.below(demos.size()));
            demo_of[i] = d;
            start_of[i] = progress[d].max_starting_point;
            if (start_of[i] > 0 && cached_start[d] != start_of[i]) {
                start_states[d] = snapshot_at(demos[d], start_of[i], *replay_env);
                cached_start[d] = start_of[i];
            }
        }
        std::vector<Rollout> batch(cfg.batch);
        parallel_for(cfg.batch, cfg.workers, [&](std::size_t i, unsigned w) {
            const auto a = out.attempts + i;
            const auto d = demo_of[i];
            batch[i] = run_attempt(*envs[w], demos[d], d, start_of[i], &start_states[d], *learner, cfg,
                                   derive_seed(cfg.seed, {a, stream::backward}), cum_buffers[w]);
        });

        for (const auto& r : batch) {
            ++out.attempts;
            out.training_frames += r.frames;
            auto& p = progress[r.demo];
            ++p.attempts;
            p.window.emplace_back(r.success, r.score);
            if (p.window.size() > interval)
                p.window.pop_front();
            if (++p.since_check < interval)
                continue;
            p.since_check = 0;
            const double rate = p.success_rate();
            if (p.max_starting_point > 0) {
                if (rate >= cfg.success_threshold) {
                    p.max_starting_point =
                        p.max_starting_point > cfg.start_shift ? p.max_starting_point - cfg.start_shift : 0;
                }
            }
            else {
                p.held_at_zero = rate >= cfg.final_success_rate;
            }
            ProgressRow row{out.attempts, out.training_frames, r.demo, p.max_starting_point, rate, p.mean_score()};
            out.history.push_back(row);
            if (on_progress)
                on_progress(row);
        }
        learner->update(batch);
        if (cfg.checkpoint_interval > 0 && out.attempts >= next_checkpoint) {
            take_checkpoint();
            while (next_checkpoint <= out.attempts)
                next_checkpoint += cfg.checkpoint_interval;
        }
    }
    out.finished = all_held();
    take_checkpoint();
    for (const auto& p : progress)
        out.max_starting_points.push_back(p.max_starting_point);
    out.policy = std::move(learner);
    return out;
}

// Reporting convention: a demonstration counts as solved once its curve is
// within `tolerance` frames of 0.
inline bool start_point_solved(std::uint64_t max_starting_point, std::uint64_t tolerance = 50)
{
    return max_starting_point <= tolerance;
}

struct CheckpointChoice {
    std::size_t index = 0;
    double selection_score = 0.0;
    // Fresh evaluation of the chosen policy; this is the score to report.
    double retest_score = 0.0;
};

// Evaluates up to `sample` checkpoints whose starting-point sum is within
// `near` of the lowest, keeps the best, and evaluates it again with fresh
// randomness. evaluate(policy, round) must use independent streams per round.
inline CheckpointChoice best_checkpoint(std::span<const PolicyFile> candidates,
                                        const std::function<double(const Learner&, std::uint64_t round)>& evaluate,
                                        std::size_t sample = 5, std::uint64_t near = 0, std::uint64_t seed = 0)
{
    if (candidates.empty())
        throw ContractViolation("best_checkpoint: no candidates");
    if (sample < 1)
        throw ContractViolation("best_checkpoint: sample must be >= 1");
    std::uint64_t lowest = std::numeric_limits<std::uint64_t>::max();
    for (const auto& c : candidates)
        lowest = std::min(lowest, c.max_start_sum);
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (candidates[i].max_start_sum <= lowest + near)
            pool.push_back(i);
    if (pool.size() > sample) {
        Rng rng(derive_seed(seed, {stream::backward, stream::eval}));
        for (std::size_t i = 0; i < sample; ++i)
            std::swap(pool[i], pool[i + static_cast<std::size_t>(rng.below(pool.size() - i))]);
        pool.resize(sample);
        std::sort(pool.begin(), pool.end());
    }
    CheckpointChoice best;
    bool any = false;
    for (auto i : pool) {
        const double s = evaluate(*candidates[i].instantiate(), 0);
        if (!any || s > best.selection_score) {
            best.index = i;
            best.selection_score = s;
            any = true;
        }
    }
    best.retest_score = evaluate(*candidates[best.index].instantiate(), 1);
    return best;
}

} // namespace goexplore
