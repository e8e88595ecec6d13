#pragma once

#include <memory>
#include <optional>
#include <string>

#include "env.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace goexplore {

// Forwards everything to the wrapped environment.
class EnvWrapper : public Environment {
public:
    explicit EnvWrapper(std::unique_ptr<Environment> inner) : _inner(std::move(inner))
    {
        if (!_inner)
            throw ContractViolation("wrapper: null environment");
    }

    Environment& inner() noexcept { return *_inner; }
    const Environment& inner() const noexcept { return *_inner; }

    std::string name() const override { return _inner->name(); }
    int num_actions() const override { return _inner->num_actions(); }
    int frame_skip() const override { return _inner->frame_skip(); }
    EpisodeEnd episode_end() const override { return _inner->episode_end(); }
    std::uint64_t config_hash() const override { return _inner->config_hash(); }
    ResetResult reset(std::uint64_t seed) override { return _inner->reset(seed); }
    StepResult step(ActionId action) override { return _inner->step(action); }
    EnvSnapshot snapshot() const override { return _inner->snapshot(); }
    void restore(const EnvSnapshot& s) override { _inner->restore(s); }
    FrameCounters frame_counters() const override { return _inner->frame_counters(); }
    bool done() const override { return _inner->done(); }
    double score() const override { return _inner->score(); }
    DomainInfo domain_info() const override { return _inner->domain_info(); }
    Frame render() const override { return _inner->render(); }
    Observation observe() const override { return _inner->observe(); }
    std::uint64_t state_id() const override { return _inner->state_id(); }
    void set_render_frames(bool on) override { _inner->set_render_frames(on); }
    void seed(std::uint64_t s) override { _inner->seed(s); }
    ActionId last_executed_action() const override { return _inner->last_executed_action(); }
    std::string render_text() const override { return _inner->render_text(); }

private:
    std::unique_ptr<Environment> _inner;
};

// With probability p per training frame the previously executed action is
// executed instead of the submitted one. The first action after a reset or
// restore is never replaced. One uniform draw is consumed per step after the
// first, whether or not it leads to a replacement.
class StickyActions final : public EnvWrapper {
public:
    StickyActions(std::unique_ptr<Environment> inner, double p) : EnvWrapper(std::move(inner)), _p(p)
    {
        if (!(p >= 0.0 && p < 1.0))
            throw ContractViolation("sticky actions: probability must be in [0, 1), got " + std::to_string(p));
    }

    double probability() const noexcept { return _p; }

    void seed(std::uint64_t s) override
    {
        _rng = Rng(derive_seed(s, {stream::sticky}));
        EnvWrapper::seed(s);
    }

    ResetResult reset(std::uint64_t s) override
    {
        _rng = Rng(derive_seed(s, {stream::sticky}));
        _prev.reset();
        return EnvWrapper::reset(s);
    }

    void restore(const EnvSnapshot& snap) override
    {
        _prev.reset();
        EnvWrapper::restore(snap);
    }

    StepResult step(ActionId action) override
    {
        ActionId executed = action;
        if (_prev && _rng.bernoulli(_p))
            executed = *_prev;
        auto r = EnvWrapper::step(executed);
        _prev = executed;
        _executed = executed;
        return r;
    }

    ActionId last_executed_action() const override { return _executed; }

private:
    double _p;
    Rng _rng{0};
    std::optional<ActionId> _prev;
    ActionId _executed = noop_action;
};

// On reset, injects n no-op actions before control passes to the agent, with
// n uniform in [0, max_noops] (or fixed via force_noops for evaluation).
// Restores do not inject anything.
class RandomNoops final : public EnvWrapper {
public:
    RandomNoops(std::unique_ptr<Environment> inner, int max_noops) : EnvWrapper(std::move(inner)), _max(max_noops)
    {
        if (max_noops < 0)
            throw ContractViolation("random no-ops: max_noops must be >= 0");
    }

    int max_noops() const noexcept { return _max; }

    // Use exactly n no-ops on subsequent resets; std::nullopt restores random
    // draws.
    void force_noops(std::optional<int> n) { _forced = n; }

    int last_noops() const noexcept { return _last; }

    ResetResult reset(std::uint64_t s) override
    {
        auto r = EnvWrapper::reset(s);
        if (_forced)
            _last = *_forced;
        else
            _last = static_cast<int>(Rng(derive_seed(s, {stream::noops})).below(static_cast<std::uint64_t>(_max) + 1));
        for (int i = 0; i < _last && !done(); ++i)
            EnvWrapper::step(noop_action);
        if (_last > 0)
            r = {observe(), snapshot()};
        return r;
    }

private:
    int _max;
    std::optional<int> _forced;
    int _last = 0;
};

inline std::unique_ptr<Environment> wrap_sticky(std::unique_ptr<Environment> env, double p)
{
    return std::make_unique<StickyActions>(std::move(env), p);
}

inline std::unique_ptr<Environment> wrap_noops(std::unique_ptr<Environment> env, int max_noops)
{
    return std::make_unique<RandomNoops>(std::move(env), max_noops);
}

} // namespace goexplore
