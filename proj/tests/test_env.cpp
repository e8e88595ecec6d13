#include <gtest/gtest.h>

#include <map>
#include <queue>
#include <set>

#include <goexplore/env_config.hpp>
#include <goexplore/room_world.hpp>
#include <goexplore/wrappers.hpp>

using namespace goexplore;

namespace {

std::vector<ActionId> random_actions(std::uint64_t seed, int n)
{
    Rng rng(seed);
    std::vector<ActionId> out;
    for (int i = 0; i < n; ++i)
        out.push_back(static_cast<ActionId>(rng.below(num_move_actions)));
    return out;
}

struct Trace {
    std::vector<Observation> obs;
    std::vector<double> rewards;
    std::vector<bool> dones;

    bool operator==(const Trace&) const = default;
};

Trace play(Environment& env, const std::vector<ActionId>& actions)
{
    Trace t;
    for (auto a : actions) {
        if (env.done())
            break;
        auto r = env.step(a);
        t.obs.push_back(r.obs);
        t.rewards.push_back(r.reward);
        t.dones.push_back(r.done);
    }
    return t;
}

std::vector<RoomWorldSpec> suite()
{
    return {two_maze_spec(), key_door_spec(), deceptive_corridor_spec(), key_door_snake_spec(2, 2, 7, 5)};
}

} // namespace

TEST(RoomWorld, ResetIsCanonicalAndSeedIndependent)
{
    for (const auto& spec : suite()) {
        RoomWorld env(spec);
        auto a = env.reset(0);
        env.step(Right);
        auto b = env.reset(0);
        auto c = env.reset(12345);
        EXPECT_EQ(a.snapshot, b.snapshot) << spec.kind;
        EXPECT_EQ(a.snapshot, c.snapshot) << spec.kind;
        EXPECT_EQ(env.frame_counters(), (FrameCounters{0, 0}));
    }
}

TEST(RoomWorld, TwoMazeStartsBetweenTheMazes)
{
    RoomWorld env(two_maze_spec());
    env.reset(0);
    auto info = env.domain_info();
    EXPECT_EQ(info.room, 1);
    // Room 0 lies west, room 2 east; the hub corridor touches both.
    const auto& L = env.layout();
    const int y = L.spec.room_h / 2;
    EXPECT_EQ(L.tiles[static_cast<std::size_t>(L.index(L.room_origin_x(1), y))], Tile::Empty);
    EXPECT_EQ(L.tiles[static_cast<std::size_t>(L.index(L.room_origin_x(2) - 1, y))], Tile::Empty);
}

TEST(RoomWorld, FrameAccounting)
{
    RoomWorld env(key_door_spec());
    env.reset(0);
    for (int i = 0; i < 100 && !env.done(); ++i)
        env.step(NoOp);
    EXPECT_EQ(env.frame_counters(), (FrameCounters{400, 100}));

    auto spec = key_door_spec();
    spec.frame_skip = 1;
    spec.speed = 8;
    RoomWorld one(spec);
    one.reset(0);
    for (int i = 0; i < 7; ++i)
        one.step(NoOp);
    EXPECT_EQ(one.frame_counters().game_frames, one.frame_counters().training_frames);
}

TEST(RoomWorld, NoOpInEmptyRoomIsQuiet)
{
    RoomWorld env(key_door_spec());
    env.reset(0);
    auto r = env.step(NoOp);
    EXPECT_EQ(r.reward, 0.0);
    EXPECT_FALSE(r.done);
}

TEST(RoomWorld, OneTilePerTrainingFrame)
{
    RoomWorld env(key_door_spec());
    env.reset(0);
    auto [x0, y0] = env.agent_tile();
    env.step(Right);
    auto [x1, y1] = env.agent_tile();
    EXPECT_EQ(x1, x0 + 1);
    EXPECT_EQ(y1, y0);
    env.step(Left);
    EXPECT_EQ(env.agent_tile(), std::make_pair(x0, y0));
}

TEST(RoomWorld, StepAfterDoneIsRejected)
{
    auto spec = key_door_spec();
    spec.time_limit = 8;
    RoomWorld env(spec);
    env.reset(0);
    env.step(NoOp);
    auto r = env.step(NoOp);
    EXPECT_TRUE(r.done);
    EXPECT_THROW(env.step(NoOp), ContractViolation);
    env.reset(0);
    EXPECT_NO_THROW(env.step(NoOp));
}

TEST(RoomWorld, DeterministicStreams)
{
    for (const auto& spec : suite())
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            auto actions = random_actions(seed, 400);
            RoomWorld a(spec), b(spec);
            a.reset(seed);
            b.reset(seed + 99);
            EXPECT_EQ(play(a, actions), play(b, actions)) << spec.kind;
        }
}

TEST(RoomWorld, SnapshotEquivalence)
{
    for (const auto& spec : suite())
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            RoomWorld env(spec);
            env.reset(0);
            auto prefix = random_actions(seed, 50 + static_cast<int>(seed) * 7);
            play(env, prefix);
            auto snap = env.snapshot();
            auto suffix = random_actions(seed + 1000, 80);
            auto through = play(env, suffix);
            auto score_through = env.score();

            RoomWorld other(spec);
            other.restore(snap);
            EXPECT_EQ(play(other, suffix), through);
            EXPECT_EQ(other.score(), score_through);

            auto round = EnvSnapshot::deserialize(snap.serialize());
            EXPECT_EQ(round, snap);
        }
}

TEST(RoomWorld, SnapshotBytesAreFrozen)
{
    // Guards the byte layout: a change here breaks existing checkpoints.
    RoomWorld env(key_door_spec());
    env.reset(0);
    env.step(Right);
    env.step(Down);
    auto bytes = env.snapshot().serialize();
    // header 46 bytes, state 31 bytes with no keys held
    EXPECT_EQ(bytes.size(), 46u + 31u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "GESN");
    RoomWorld again(key_door_spec());
    again.reset(7);
    again.step(Right);
    again.step(Down);
    EXPECT_EQ(again.snapshot().serialize(), bytes);
}

TEST(RoomWorld, RestoreRejectsOtherConfig)
{
    RoomWorld a(key_door_spec());
    auto spec = key_door_spec();
    spec.door_reward = 301;
    RoomWorld b(spec);
    EXPECT_THROW(b.restore(a.snapshot()), FormatError);
    EXPECT_THROW(RoomWorld(two_maze_spec()).restore(a.snapshot()), FormatError);
}

TEST(RoomWorld, KeyBeforeDoorReward)
{
    // Hand-built corridor: start, key, door, treasure.
    RoomWorldSpec s;
    s.kind = "key_door";
    s.rooms_x = 2;
    s.rooms_y = 1;
    s.room_w = 7;
    s.room_h = 3;
    s.start = {0, 1, 1};
    s.connections = {{0, 1, true}};
    s.keys = {{0, 3, 1}};
    s.treasures = {{{1, 3, 1}, 1000.0, true}};
    RoomWorld env(s);
    env.reset(0);
    std::vector<double> rewards;
    for (int i = 0; i < 10 && !env.done(); ++i)
        rewards.push_back(env.step(Right).reward);
    // key at step 2, door at step 6 (the opening of room 1), treasure at 9.
    ASSERT_EQ(rewards.size(), 9u);
    EXPECT_EQ(rewards[1], s.key_reward);
    EXPECT_EQ(rewards[5], s.door_reward);
    EXPECT_EQ(rewards[8], 1000.0);
    EXPECT_TRUE(env.done());
    EXPECT_EQ(env.domain_info().level, 1);

    // Without the key the door blocks.
    s.keys.clear();
    RoomWorld nokey(s);
    nokey.reset(0);
    double total = 0;
    for (int i = 0; i < 20; ++i)
        total += nokey.step(Right).reward;
    EXPECT_EQ(total, 0.0);
    EXPECT_EQ(nokey.domain_info().room, 0);
}

TEST(RoomWorld, ExitTreasureAdvancesLevel)
{
    auto s = key_door_snake_spec(2, 1, 7, 5);
    s.levels = 2;
    RoomWorld env(s);
    env.reset(0);
    // Fetch the key up and to the left, then walk right through the door.
    env.step(Up);
    env.step(Left);
    env.step(Down);
    for (int i = 0; i < 40 && env.domain_info().level == 0 && !env.done(); ++i)
        env.step(Right);
    EXPECT_EQ(env.domain_info().level, 1);
    EXPECT_FALSE(env.done());
    EXPECT_GT(env.score(), 0.0);
    EXPECT_EQ(env.domain_info().room, s.start.room);
}

TEST(RoomWorld, HazardPolicies)
{
    RoomWorldSpec s;
    s.kind = "key_door";
    s.rooms_x = 1;
    s.rooms_y = 1;
    s.room_w = 7;
    s.room_h = 3;
    s.start = {0, 1, 1};
    s.hazards = {{0, 3, 1}};
    {
        RoomWorld env(s);
        env.reset(0);
        env.step(Right);
        auto r = env.step(Right);
        EXPECT_TRUE(r.done);
        EXPECT_EQ(env.episode_end(), EpisodeEnd::Terminate);
    }
    s.hazard_policy = EpisodeEnd::Respawn;
    {
        RoomWorld env(s);
        auto start = env.reset(0);
        env.step(Right);
        auto r = env.step(Right);
        EXPECT_FALSE(r.done);
        EXPECT_EQ(env.domain_info().x, start.obs.features->x);
    }
}

TEST(RoomWorld, DeceptiveCorridorRandomRolloutsAreNegative)
{
    RoomWorld env(deceptive_corridor_spec());
    double total = 0;
    const int n = 400;
    for (int ep = 0; ep < n; ++ep) {
        env.reset(0);
        Rng rng(derive_seed(7, {static_cast<std::uint64_t>(ep)}));
        for (int t = 0; t < 100 && !env.done(); ++t)
            env.step(static_cast<ActionId>(rng.below(num_move_actions)));
        total += env.score();
    }
    EXPECT_LT(total / n, 0.0);
    EXPECT_GT(max_attainable_score(build_layout(deceptive_corridor_spec())), 0.0);
}

TEST(RoomWorld, StateBitsAreBounded)
{
    for (const auto& spec : suite()) {
        RoomWorld env(spec);
        env.reset(0);
        auto actions = random_actions(3, 2000);
        for (auto a : actions) {
            if (env.done())
                env.reset(0);
            auto r = env.step(a);
            EXPECT_LT(r.info.room, env.layout().num_rooms());
            EXPECT_LE(static_cast<int>(r.info.key_rooms.size()), spec.key_capacity);
            for (auto p : r.obs.frame.pixels)
                EXPECT_LE(p, 255);
        }
    }
}

// Brute force over all action sequences on a tiny world agrees with the
// layered search.
TEST(RoomWorld, MaxAttainableMatchesBruteForce)
{
    RoomWorldSpec s;
    s.kind = "deceptive_corridor";
    s.rooms_x = 2;
    s.rooms_y = 1;
    s.room_w = 5;
    s.room_h = 4;
    s.start = {0, 1, 1};
    s.connections = {{0, 1, false}};
    s.logs = {{0, 2, 1}, {0, 2, 2}};
    s.treasures = {{{1, 3, 1}, 50.0, false}, {{0, 1, 2}, 7.0, false}};
    s.hazard_policy = EpisodeEnd::Respawn;
    auto L = build_layout(s);
    const double oracle = max_attainable_score(L);

    // BFS over exact environment states, keeping the best score per state.
    RoomWorld env(L);
    env.reset(0);
    std::map<std::uint64_t, double> best;
    std::queue<EnvSnapshot> q;
    q.push(env.snapshot());
    best[env.state_id()] = 0.0;
    double top = 0.0;
    while (!q.empty()) {
        auto snap = q.front();
        q.pop();
        for (ActionId a = 1; a < num_move_actions; ++a) {
            env.restore(snap);
            env.step(a);
            const auto id = env.state_id();
            const double sc = env.score();
            auto it = best.find(id);
            if (it == best.end() || sc > it->second) {
                best[id] = sc;
                top = std::max(top, sc);
                if (!env.done())
                    q.push(env.snapshot());
            }
        }
    }
    EXPECT_DOUBLE_EQ(oracle, top);
    EXPECT_DOUBLE_EQ(oracle, 57.0 - 1.0);
}

TEST(EnvConfig, ParsesOverrides)
{
    auto cfg = KvConfig::parse(R"(
[env]
kind = key_door_small
levels = 3
episode_end = respawn
time_limit = 4k
)");
    auto spec = read_env_spec(cfg);
    cfg.reject_unused();
    EXPECT_EQ(spec.levels, 3);
    EXPECT_EQ(spec.hazard_policy, EpisodeEnd::Respawn);
    EXPECT_EQ(spec.time_limit, 4000);
}

TEST(EnvConfig, ListKeysReplaceDefaults)
{
    auto cfg = KvConfig::parse(R"(
[env]
kind = key_door
rooms_x = 2
rooms_y = 1
levels = 1
start = 0, 1, 1
connection = 0-1 door
key = 0, 2, 2
hazard = none
treasure = 1, 3, 3, 500, exit
)");
    auto spec = read_env_spec(cfg);
    EXPECT_EQ(spec.connections.size(), 1u);
    EXPECT_TRUE(spec.connections[0].door);
    EXPECT_TRUE(spec.hazards.empty());
    ASSERT_EQ(spec.treasures.size(), 1u);
    EXPECT_TRUE(spec.treasures[0].exit);
}

TEST(EnvConfig, ErrorsNameTheField)
{
    auto expect_path = [](const std::string& text, const std::string& path) {
        auto cfg = KvConfig::parse(text);
        try {
            read_env_spec(cfg);
            ADD_FAILURE() << "no error for " << path;
        }
        catch (const ConfigError& e) {
            EXPECT_EQ(e.path(), path) << e.what();
        }
    };
    expect_path("[env]\nkind = pong\n", "env.kind");
    expect_path("[env]\nlevels = two\n", "env.levels");
    expect_path("[env]\nepisode_end = sometimes\n", "env.episode_end");
    expect_path("[env]\nstart = 99, 1, 1\n", "env.start");
    expect_path("[env]\nframe_skip = 0\n", "env.frame_skip");
}

TEST(StickyActions, ZeroIsIdentity)
{
    auto actions = random_actions(1, 300);
    RoomWorld plain(key_door_spec());
    plain.reset(5);
    StickyActions sticky(std::make_unique<RoomWorld>(key_door_spec()), 0.0);
    sticky.reset(5);
    EXPECT_EQ(play(plain, actions), play(sticky, actions));
}

TEST(StickyActions, RejectsOne)
{
    EXPECT_THROW(StickyActions(std::make_unique<RoomWorld>(key_door_spec()), 1.0), ContractViolation);
    EXPECT_THROW(StickyActions(std::make_unique<RoomWorld>(key_door_spec()), -0.1), ContractViolation);
}

TEST(StickyActions, ReplacementPatternIsReproducible)
{
    // Oracle: the same uniform stream, consumed once per step after the first.
    const double p = 0.25;
    auto actions = random_actions(2, 200);
    StickyActions env(std::make_unique<RoomWorld>(deceptive_corridor_spec()), p);
    env.reset(42);
    Rng oracle(derive_seed(42, {stream::sticky}));
    ActionId prev = -1;
    int replaced = 0;
    for (std::size_t i = 0; i < actions.size() && !env.done(); ++i) {
        ActionId expect = actions[i];
        if (i > 0 && oracle.uniform() < p)
            expect = prev;
        env.step(actions[i]);
        EXPECT_EQ(env.last_executed_action(), expect) << i;
        replaced += expect != actions[i];
        prev = expect;
    }
    EXPECT_GT(replaced, 0);
}

TEST(StickyActions, FirstActionNeverReplaced)
{
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        StickyActions env(std::make_unique<RoomWorld>(key_door_spec()), 0.9);
        env.reset(seed);
        env.step(Right);
        ASSERT_EQ(env.last_executed_action(), Right);
        auto snap = env.snapshot();
        env.step(Left);
        env.restore(snap);
        env.step(Down);
        ASSERT_EQ(env.last_executed_action(), Down);
    }
}

TEST(StickyActions, EmpiricalFrequency)
{
    RoomWorldSpec spec;
    spec.rooms_x = spec.rooms_y = 1;
    spec.room_w = 7;
    spec.room_h = 7;
    spec.start = {0, 3, 3};
    spec.time_limit = std::int64_t{1} << 40;
    StickyActions env(std::make_unique<RoomWorld>(spec), 0.25);
    env.reset(9);
    env.step(Up);
    // Always submit something other than the last executed action so every
    // replacement is visible.
    long replaced = 0;
    const long n = 1000000;
    for (long i = 0; i < n; ++i) {
        ActionId a = env.last_executed_action() % (num_move_actions - 1) + 1;
        env.step(a);
        replaced += env.last_executed_action() != a;
    }
    EXPECT_NEAR(static_cast<double>(replaced) / n, 0.25, 0.01);
}

TEST(RandomNoops, ZeroIsIdentity)
{
    RandomNoops env(std::make_unique<RoomWorld>(key_door_spec()), 0);
    auto r = env.reset(3);
    EXPECT_EQ(env.last_noops(), 0);
    EXPECT_EQ(r.snapshot.training_frames, 0u);
}

TEST(RandomNoops, CountsCoverRangeAndRepeatPerSeed)
{
    RandomNoops env(std::make_unique<RoomWorld>(key_door_spec()), 30);
    std::set<int> seen;
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        auto r = env.reset(seed);
        const int n = env.last_noops();
        EXPECT_GE(n, 0);
        EXPECT_LE(n, 30);
        EXPECT_EQ(r.snapshot.training_frames, static_cast<std::uint64_t>(n));
        seen.insert(n);
        env.reset(seed);
        EXPECT_EQ(env.last_noops(), n);
    }
    EXPECT_EQ(seen.size(), 31u);
}

TEST(RandomNoops, ForcedCount)
{
    RandomNoops env(std::make_unique<RoomWorld>(key_door_spec()), 30);
    env.force_noops(17);
    auto r = env.reset(0);
    EXPECT_EQ(env.last_noops(), 17);
    EXPECT_EQ(env.frame_counters(), (FrameCounters{68, 17}));
    EXPECT_EQ(r.snapshot.training_frames, 17u);
}
