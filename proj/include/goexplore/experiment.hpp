#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cell.hpp"
#include "env_config.hpp"
#include "errors.hpp"
#include "evaluation.hpp"
#include "explorer.hpp"
#include "kv_config.hpp"
#include "learners.hpp"
#include "robustify.hpp"
#include "selector.hpp"

namespace goexplore {

struct RobustifySettings {
    BackwardConfig backward;
    TabularConfig tabular;
    std::string learner = "tabular";
    std::size_t demos = 1;
    LevelFilter level_filter = LevelFilter::MaxLevel;
    // 0 keeps the whole demonstration.
    std::uint64_t truncate_frames = 0;
    bool truncate_to_last_reward = false;
    std::uint64_t demo_checkpoint_every = 25;
    // Checkpoints evaluated when picking the final policy; 0 keeps the last.
    std::size_t select_sample = 5;
    std::uint64_t select_near = 0;
};

struct ExperimentConfig {
    std::string preset;
    RoomWorldSpec env = default_spec("key_door");
    CellRepresentation representation;
    SelectionConfig selection = [] {
        SelectionConfig s;
        s.domain_mode = true;
        return s;
    }();
    ExploreConfig explore;
    // Archive checkpoint every this many iterations; 0 writes only the final one.
    std::uint64_t checkpoint_interval = 100;
    RobustifySettings robustify;
    EvalProtocol eval;
    std::string out_dir = "out";

    void validate() const
    {
        build_layout(env);
        representation.validate();
        selection.validate();
        if (selection.domain_mode && !representation.domain())
            throw ConfigError("selection.domain_mode", "needs representation.mode = domain");
        explore.validate();
        robustify.backward.validate();
        robustify.tabular.validate();
        if (robustify.learner != "tabular" && robustify.learner != "replay_oracle")
            throw ConfigError("robustify.learner", "expected tabular or replay_oracle, got '" + robustify.learner + "'");
        if (robustify.demos < 1)
            throw ConfigError("robustify.demos", "must be >= 1");
        if (robustify.demo_checkpoint_every < 1)
            throw ConfigError("robustify.demo_checkpoint_every", "must be >= 1");
        eval.validate();
        if (out_dir.empty())
            throw ConfigError("output.dir", "must not be empty");
    }
};

inline const std::vector<std::string>& preset_names()
{
    static const std::vector<std::string> names = {"montezuma-like nodomain", "montezuma-like domain",
                                                   "pitfall-like nodomain", "pitfall-like domain"};
    return names;
}

// Selection weights and batch sizes of the published no-domain and domain
// knowledge settings, mapped onto the synthetic worlds: KeyDoorWorld for the
// Montezuma-like presets and DeceptiveCorridor for the Pitfall-like ones.
inline ExperimentConfig preset(const std::string& name)
{
    ExperimentConfig c;
    c.preset = name;
    auto& s = c.selection;
    if (name == "montezuma-like nodomain") {
        c.env = default_spec("key_door");
        c.representation.mode = CellRepresentation::Mode::Downscale;
        s.weight = {0.1, 0.0, 0.3};
        s.domain_mode = false;
        c.explore.batch = 100;
    }
    else if (name == "montezuma-like domain") {
        c.env = default_spec("key_door");
        c.representation.mode = CellRepresentation::Mode::Domain;
        c.representation.grid_size = 16;
        s.weight = {0.0, 0.0, 0.0};
        s.w_horizontal = 0.3;
        s.w_vertical = 0.1;
        s.w_more_keys = 10;
        s.more_keys = true;
        s.domain_mode = true;
        c.explore.batch = 1000;
    }
    else if (name == "pitfall-like nodomain") {
        c.env = default_spec("deceptive_corridor");
        c.representation.mode = CellRepresentation::Mode::Downscale;
        s.weight = {1.0, 1.0, 0.0};
        s.domain_mode = false;
        c.explore.batch = 1000;
        c.robustify.backward.allowed_deficit = 250;
        c.robustify.backward.reward = {RewardMode::Scale, 0.001};
    }
    else if (name == "pitfall-like domain") {
        c.env = default_spec("deceptive_corridor");
        c.representation.mode = CellRepresentation::Mode::Domain;
        c.representation.grid_size = 16;
        s.weight = {1.0, 0.5, 0.0};
        s.w_horizontal = 1.0;
        s.w_vertical = 0.0;
        s.w_more_keys = 0.0;
        s.more_keys = false;
        s.domain_mode = true;
        c.explore.batch = 1000;
        c.robustify.backward.allowed_deficit = 250;
        c.robustify.backward.reward = {RewardMode::Scale, 0.001};
    }
    else {
        std::string known;
        for (const auto& n : preset_names())
            known += (known.empty() ? "" : ", ") + n;
        throw ConfigError("experiment.preset", "unknown preset '" + name + "' (known: " + known + ")");
    }
    return c;
}

// Every accepted key, as section.key. Used for environment-variable
// overrides and documented in the README.
inline const std::vector<std::string>& known_config_keys()
{
    static const std::vector<std::string> keys = {
        "experiment.preset",
        "env.kind", "env.rooms_x", "env.rooms_y", "env.room_w", "env.room_h", "env.levels", "env.maze_seed",
        "env.key_reward", "env.door_reward", "env.log_penalty", "env.key_capacity", "env.frame_skip",
        "env.tile_units", "env.speed", "env.time_limit", "env.pixels_per_tile", "env.start", "env.episode_end",
        "representation.mode", "representation.grid_size", "representation.width", "representation.height",
        "representation.depth",
        "selection.w_chosen", "selection.w_chosen_since_new", "selection.w_seen", "selection.p_chosen",
        "selection.p_chosen_since_new", "selection.p_seen", "selection.w_horizontal", "selection.w_vertical",
        "selection.w_more_keys", "selection.more_keys", "selection.eps1", "selection.eps2", "selection.level_base",
        "selection.domain_mode",
        "explore.k", "explore.repeat_p", "explore.batch", "explore.budget_frames", "explore.seed", "explore.workers",
        "explore.metric_interval", "explore.replay_return", "explore.checkpoint_interval",
        "robustify.learner", "robustify.demos", "robustify.level_filter", "robustify.truncate_frames",
        "robustify.truncate_to_last_reward", "robustify.demo_checkpoint_every", "robustify.success_threshold",
        "robustify.advance_interval", "robustify.start_shift", "robustify.window", "robustify.allowed_deficit",
        "robustify.reward_mode", "robustify.reward_scale", "robustify.horizon_slack", "robustify.sticky_p",
        "robustify.max_noops", "robustify.final_success_rate", "robustify.budget_frames", "robustify.batch",
        "robustify.workers", "robustify.seed", "robustify.policy_checkpoint_interval", "robustify.keep_checkpoints",
        "robustify.alpha", "robustify.gamma", "robustify.epsilon", "robustify.eval_epsilon",
        "robustify.select_sample", "robustify.select_near",
        "eval.max_noops", "eval.episodes", "eval.sticky_p", "eval.time_limit", "eval.seed", "eval.workers",
        "output.dir",
    };
    return keys;
}

// Builds a validated configuration: preset defaults first, then every key in
// the file. Unknown keys and invalid values throw ConfigError naming the key.
inline ExperimentConfig load_experiment(KvConfig& kv)
{
    std::string name;
    kv.read("experiment", "preset", name);
    ExperimentConfig c = name.empty() ? ExperimentConfig{} : preset(name);
    if (!kv.has("env", "kind") && !name.empty())
        kv.set("env", "kind", c.env.kind);
    c.env = read_env_spec(kv, "env");

    if (auto v = kv.get("representation", "mode")) {
        const auto m = KvConfig::lower(*v);
        if (m == "domain")
            c.representation.mode = CellRepresentation::Mode::Domain;
        else if (m == "downscale")
            c.representation.mode = CellRepresentation::Mode::Downscale;
        else
            throw ConfigError("representation.mode", "expected domain or downscale, got '" + *v + "'");
        if (!kv.has("selection", "domain_mode"))
            c.selection.domain_mode = c.representation.domain();
    }
    kv.read("representation", "grid_size", c.representation.grid_size);
    kv.read("representation", "width", c.representation.downscale.width);
    kv.read("representation", "height", c.representation.downscale.height);
    kv.read("representation", "depth", c.representation.downscale.depth);

    auto& s = c.selection;
    kv.read("selection", "w_chosen", s.weight[0]);
    kv.read("selection", "w_chosen_since_new", s.weight[1]);
    kv.read("selection", "w_seen", s.weight[2]);
    kv.read("selection", "p_chosen", s.power[0]);
    kv.read("selection", "p_chosen_since_new", s.power[1]);
    kv.read("selection", "p_seen", s.power[2]);
    kv.read("selection", "w_horizontal", s.w_horizontal);
    kv.read("selection", "w_vertical", s.w_vertical);
    kv.read("selection", "w_more_keys", s.w_more_keys);
    kv.read("selection", "more_keys", s.more_keys);
    kv.read("selection", "eps1", s.eps1);
    kv.read("selection", "eps2", s.eps2);
    kv.read("selection", "level_base", s.level_base);
    kv.read("selection", "domain_mode", s.domain_mode);

    auto& e = c.explore;
    kv.read("explore", "k", e.k);
    kv.read("explore", "repeat_p", e.repeat_p);
    kv.read("explore", "batch", e.batch);
    kv.read("explore", "budget_frames", e.budget_frames);
    kv.read("explore", "seed", e.seed);
    kv.read("explore", "workers", e.workers);
    kv.read("explore", "metric_interval", e.metric_interval);
    kv.read("explore", "replay_return", e.replay_return);
    kv.read("explore", "checkpoint_interval", c.checkpoint_interval);

    auto& r = c.robustify;
    auto& b = r.backward;
    kv.read("robustify", "learner", r.learner);
    kv.read("robustify", "demos", r.demos);
    if (auto v = kv.get("robustify", "level_filter")) {
        const auto f = KvConfig::lower(*v);
        if (f == "max_level")
            r.level_filter = LevelFilter::MaxLevel;
        else if (f == "any")
            r.level_filter = LevelFilter::Any;
        else
            throw ConfigError("robustify.level_filter", "expected max_level or any, got '" + *v + "'");
    }
    kv.read("robustify", "truncate_frames", r.truncate_frames);
    kv.read("robustify", "truncate_to_last_reward", r.truncate_to_last_reward);
    kv.read("robustify", "demo_checkpoint_every", r.demo_checkpoint_every);
    kv.read("robustify", "success_threshold", b.success_threshold);
    kv.read("robustify", "advance_interval", b.advance_interval);
    kv.read("robustify", "start_shift", b.start_shift);
    kv.read("robustify", "window", b.window);
    kv.read("robustify", "allowed_deficit", b.allowed_deficit);
    if (auto v = kv.get("robustify", "reward_mode")) {
        const auto m = KvConfig::lower(*v);
        if (m == "clip")
            b.reward.mode = RewardMode::Clip;
        else if (m == "scale")
            b.reward.mode = RewardMode::Scale;
        else
            throw ConfigError("robustify.reward_mode", "expected clip or scale, got '" + *v + "'");
    }
    kv.read("robustify", "reward_scale", b.reward.scale);
    kv.read("robustify", "horizon_slack", b.horizon_slack);
    kv.read("robustify", "sticky_p", b.sticky_p);
    kv.read("robustify", "max_noops", b.max_noops);
    kv.read("robustify", "final_success_rate", b.final_success_rate);
    kv.read("robustify", "budget_frames", b.budget_frames);
    kv.read("robustify", "batch", b.batch);
    kv.read("robustify", "workers", b.workers);
    kv.read("robustify", "seed", b.seed);
    kv.read("robustify", "policy_checkpoint_interval", b.checkpoint_interval);
    kv.read("robustify", "keep_checkpoints", b.keep_checkpoints);
    kv.read("robustify", "alpha", r.tabular.alpha);
    kv.read("robustify", "gamma", r.tabular.gamma);
    kv.read("robustify", "epsilon", r.tabular.epsilon);
    kv.read("robustify", "eval_epsilon", r.tabular.eval_epsilon);
    kv.read("robustify", "select_sample", r.select_sample);
    kv.read("robustify", "select_near", r.select_near);

    auto& p = c.eval;
    kv.read("eval", "max_noops", p.max_noops);
    kv.read("eval", "episodes", p.episodes);
    kv.read("eval", "sticky_p", p.sticky_p);
    kv.read("eval", "time_limit", p.time_limit);
    kv.read("eval", "seed", p.seed);
    kv.read("eval", "workers", p.workers);

    kv.read("output", "dir", c.out_dir);

    kv.reject_unused();
    c.validate();
    return c;
}

inline ExperimentConfig load_experiment_text(const std::string& text, const std::string& origin = "config")
{
    auto kv = KvConfig::parse(text, origin);
    return load_experiment(kv);
}

} // namespace goexplore
