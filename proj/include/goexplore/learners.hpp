#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "binary_io.hpp"
#include "env.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace goexplore {

// What a policy sees at each decision: the environment's discrete state, the
// observation, and its memory (the demonstration being followed and the
// frame index along it).
struct PolicyInput {
    std::uint64_t state_id = 0;
    const Observation* obs = nullptr;
    std::uint64_t frame = 0;
    std::optional<std::size_t> demo;
    int num_actions = 0;
};

struct Transition {
    std::uint64_t state = 0;
    ActionId action = 0;
    // Shaped reward.
    double reward = 0.0;
    std::uint64_t next_state = 0;
    // True only when the episode itself ended; cut-off rollouts bootstrap.
    bool terminal = false;
};

struct Rollout {
    std::size_t demo = 0;
    std::uint64_t start = 0;
    std::vector<Transition> transitions;
    // Unshaped final score.
    double score = 0.0;
    bool success = false;
    bool early_terminated = false;
    std::uint64_t frames = 0;
    int num_actions = 0;
};

class Learner {
public:
    virtual ~Learner() = default;
    virtual std::string kind() const = 0;
    // Must be safe to call concurrently; all randomness comes from `rng`.
    // explore=false selects the evaluation-time behaviour.
    virtual ActionId act(const PolicyInput& in, Rng& rng, bool explore) const = 0;
    virtual void update(std::span<const Rollout> batch) = 0;
    virtual void save(ByteWriter& w) const = 0;
    virtual void load(ByteReader& r) = 0;
    virtual std::unique_ptr<Learner> clone() const = 0;
};

struct TabularConfig {
    double alpha = 0.1;
    double gamma = 0.99;
    double epsilon = 0.1;
    // Exploration left in the evaluated policy. A purely greedy table can
    // lock into a no-op self-loop whose value ties the best move.
    double eval_epsilon = 0.01;

    void validate() const
    {
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw ConfigError("robustify.alpha", "must be in (0, 1]");
        if (!(gamma >= 0.0 && gamma <= 1.0))
            throw ConfigError("robustify.gamma", "must be in [0, 1]");
        if (!(epsilon >= 0.0 && epsilon <= 1.0))
            throw ConfigError("robustify.epsilon", "must be in [0, 1]");
        if (!(eval_epsilon >= 0.0 && eval_epsilon <= 1.0))
            throw ConfigError("robustify.eval_epsilon", "must be in [0, 1]");
    }
};

// One-step Q-learning over the environment's state id. Rollout transitions
// are applied last to first so a reward propagates along the whole rollout in
// one update. Ties between equal action values are broken at random.
class TabularLearner final : public Learner {
public:
    static constexpr int max_actions = 18;
    using Row = std::array<double, max_actions>;

    explicit TabularLearner(TabularConfig cfg = {}) : _cfg(cfg) { _cfg.validate(); }

    std::string kind() const override { return "tabular"; }

    ActionId act(const PolicyInput& in, Rng& rng, bool explore) const override
    {
        const int n = in.num_actions;
        if (n < 1 || n > max_actions)
            throw ContractViolation("tabular learner: unsupported action count " + std::to_string(n));
        if (rng.uniform() < (explore ? _cfg.epsilon : _cfg.eval_epsilon))
            return static_cast<ActionId>(rng.below(static_cast<std::uint64_t>(n)));
        auto it = _q.find(in.state_id);
        if (it == _q.end())
            return static_cast<ActionId>(rng.below(static_cast<std::uint64_t>(n)));
        const auto& row = it->second;
        const double best = *std::max_element(row.begin(), row.begin() + n);
        int ties = 0;
        for (int a = 0; a < n; ++a)
            ties += row[static_cast<std::size_t>(a)] == best;
        auto pick = ties > 1 ? static_cast<int>(rng.below(static_cast<std::uint64_t>(ties))) : 0;
        for (int a = 0; a < n; ++a)
            if (row[static_cast<std::size_t>(a)] == best && pick-- == 0)
                return a;
        return 0;
    }

    void update(std::span<const Rollout> batch) override
    {
        for (const auto& r : batch) {
            if (r.num_actions < 1 || r.num_actions > max_actions)
                throw ContractViolation("tabular learner: rollout without a valid action count");
            const auto n = static_cast<std::ptrdiff_t>(r.num_actions);
            for (auto it = r.transitions.rbegin(); it != r.transitions.rend(); ++it) {
                double target = it->reward;
                if (!it->terminal) {
                    auto next = _q.find(it->next_state);
                    if (next != _q.end())
                        target += _cfg.gamma * *std::max_element(next->second.begin(), next->second.begin() + n);
                }
                auto& q = _q.try_emplace(it->state, Row{})
                              .first->second[static_cast<std::size_t>(it->action)];
                q += _cfg.alpha * (target - q);
            }
        }
    }

    std::size_t states() const noexcept { return _q.size(); }

    std::optional<Row> values(std::uint64_t state) const
    {
        auto it = _q.find(state);
        if (it == _q.end())
            return std::nullopt;
        return it->second;
    }

    void save(ByteWriter& w) const override
    {
        w.put(_cfg.alpha);
        w.put(_cfg.gamma);
        w.put(_cfg.epsilon);
        w.put(_cfg.eval_epsilon);
        std::vector<std::uint64_t> keys;
        keys.reserve(_q.size());
        for (const auto& [k, v] : _q)
            keys.push_back(k);
        std::sort(keys.begin(), keys.end());
        w.put(static_cast<std::uint64_t>(keys.size()));
        for (auto k : keys) {
            w.put(k);
            for (double v : _q.at(k))
                w.put(v);
        }
    }

    void load(ByteReader& r) override
    {
        TabularConfig c;
        c.alpha = r.get<double>();
        c.gamma = r.get<double>();
        c.epsilon = r.get<double>();
        c.eval_epsilon = r.get<double>();
        try {
            c.validate();
        }
        catch (const ConfigError&) {
            throw FormatError("tabular policy: invalid hyperparameters");
        }
        _cfg = c;
        _q.clear();
        const auto n = r.get<std::uint64_t>();
        for (std::uint64_t i = 0; i < n; ++i) {
            const auto k = r.get<std::uint64_t>();
            Row row{};
            for (auto& v : row)
                v = r.get<double>();
            if (!_q.emplace(k, row).second)
                throw FormatError("tabular policy: duplicate state");
        }
    }

    std::unique_ptr<Learner> clone() const override { return std::make_unique<TabularLearner>(*this); }

    bool operator==(const TabularLearner& o) const
    {
        return _q == o._q && _cfg.alpha == o._cfg.alpha && _cfg.gamma == o._cfg.gamma &&
               _cfg.epsilon == o._cfg.epsilon && _cfg.eval_epsilon == o._cfg.eval_epsilon;
    }

private:
    TabularConfig _cfg;
    std::unordered_map<std::uint64_t, Row> _q;
};

// Plays the demonstration's own actions by frame index and never learns.
// Used to test the Backward-Algorithm control loop with a perfect learner.
class ReplayOracleLearner final : public Learner {
public:
    ReplayOracleLearner() = default;
    explicit ReplayOracleLearner(std::vector<std::vector<ActionId>> demos) : _demos(std::move(demos)) {}

    std::string kind() const override { return "replay_oracle"; }

    ActionId act(const PolicyInput& in, Rng&, bool) const override
    {
        const std::size_t d = in.demo.value_or(0);
        if (d >= _demos.size())
            throw ContractViolation("replay oracle: unknown demonstration " + std::to_string(d));
        const auto& acts = _demos[d];
        return in.frame < acts.size() ? acts[static_cast<std::size_t>(in.frame)] : noop_action;
    }

    void update(std::span<const Rollout>) override {}

    void save(ByteWriter& w) const override
    {
        w.put(static_cast<std::uint64_t>(_demos.size()));
        for (const auto& d : _demos) {
            w.put(static_cast<std::uint64_t>(d.size()));
            for (auto a : d)
                w.put(static_cast<std::int32_t>(a));
        }
    }

    void load(ByteReader& r) override
    {
        _demos.assign(r.get<std::uint64_t>(), {});
        for (auto& d : _demos) {
            d.resize(r.get<std::uint64_t>());
            for (auto& a : d)
                a = r.get<std::int32_t>();
        }
    }

    std::unique_ptr<Learner> clone() const override { return std::make_unique<ReplayOracleLearner>(*this); }

private:
    std::vector<std::vector<ActionId>> _demos;
};

inline std::unique_ptr<Learner> make_learner(const std::string& kind, const TabularConfig& tabular = {})
{
    if (kind == "tabular")
        return std::make_unique<TabularLearner>(tabular);
    if (kind == "replay_oracle")
        return std::make_unique<ReplayOracleLearner>();
    throw ConfigError("robustify.learner", "unknown learner '" + kind + "' (expected tabular or replay_oracle)");
}

// Policy checkpoint file:
//   "GEPL" u16 version string kind u64 attempts u64 max_start_sum
//   bytes payload u64 fnv1a of everything before it
struct PolicyFile {
    static constexpr std::uint16_t format_version = 1;

    std::string kind;
    std::uint64_t attempts = 0;
    std::uint64_t max_start_sum = 0;
    std::vector<std::uint8_t> payload;

    static PolicyFile of(const Learner& l, std::uint64_t attempts = 0, std::uint64_t max_start_sum = 0)
    {
        ByteWriter w;
        l.save(w);
        return {l.kind(), attempts, max_start_sum, std::move(w).bytes()};
    }

    std::unique_ptr<Learner> instantiate() const
    {
        std::unique_ptr<Learner> l;
        try {
            l = make_learner(kind);
        }
        catch (const ConfigError&) {
            throw FormatError("policy checkpoint: unknown learner kind '" + kind + "'");
        }
        ByteReader r(payload, "policy payload");
        l->load(r);
        if (!r.at_end())
            throw FormatError("policy checkpoint: trailing payload bytes");
        return l;
    }

    std::vector<std::uint8_t> serialize() const
    {
        ByteWriter w;
        w.put_raw("GEPL");
        w.put(format_version);
        w.put_string(kind);
        w.put(attempts);
        w.put(max_start_sum);
        w.put_bytes(payload);
        w.put(fnv1a(w.bytes()));
        return std::move(w).bytes();
    }

    static PolicyFile deserialize(std::span<const std::uint8_t> bytes)
    {
        ByteReader r(bytes, "policy checkpoint");
        r.expect_raw("GEPL");
        const auto version = r.get<std::uint16_t>();
        if (version != format_version)
            throw FormatError("policy checkpoint: unsupported version " + std::to_string(version));
        PolicyFile p;
        p.kind = r.get_string();
        p.attempts = r.get<std::uint64_t>();
        p.max_start_sum = r.get<std::uint64_t>();
        p.payload = r.get_bytes();
        const std::size_t body = r.position();
        const auto sum = r.get<std::uint64_t>();
        if (!r.at_end())
            throw FormatError("policy checkpoint: trailing bytes");
        if (sum != fnv1a(bytes.subspan(0, body)))
            throw FormatError("policy checkpoint: checksum mismatch");
        return p;
    }

    void save(const std::string& path) const { write_file(path, serialize()); }
    static PolicyFile load(const std::string& path) { return deserialize(read_file(path)); }

    bool operator==(const PolicyFile&) const = default;
};

} // namespace goexplore
