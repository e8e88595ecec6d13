#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include <goexplore/env_config.hpp>
#include <goexplore/explorer.hpp>
#include <goexplore/robustify.hpp>

#include "scripted_env.hpp"

using namespace goexplore;
using goexplore::testing::ScriptedEnv;

namespace {

EnvFactory small_world()
{
    return env_factory(default_spec("key_door_small"));
}

Archive explore_small(std::uint64_t seed, std::uint64_t budget)
{
    CellRepresentation repr;
    repr.grid_size = 8;
    SelectionConfig sel;
    sel.weight = {0.0, 0.0, 0.0};
    sel.w_horizontal = 0.3;
    sel.w_vertical = 0.1;
    sel.w_more_keys = 10;
    sel.domain_mode = true;
    ExploreConfig ec;
    ec.budget_frames = budget;
    ec.seed = seed;
    return run_phase1(small_world(), repr, sel, ec).archive;
}

const Archive& level1_archive()
{
    static const Archive a = explore_small(0, 300'000);
    return a;
}

// Rewards of 1 exactly at the given (1-based) frames, length `len`.
Demonstration scripted_demo(std::initializer_list<int> reward_frames, int len, std::uint64_t every = 25)
{
    std::vector<ActionId> actions(static_cast<std::size_t>(len), 0);
    for (int f : reward_frames)
        actions[static_cast<std::size_t>(f - 1)] = 1;
    ScriptedEnv env(len + 10);
    return record_demonstration(env, actions, every);
}

BackwardConfig deterministic_cfg()
{
    BackwardConfig c;
    c.sticky_p = 0.0;
    c.max_noops = 0;
    c.advance_interval = 4;
    c.batch = 1;
    c.checkpoint_interval = 0;
    return c;
}

} // namespace

TEST(ShapeReward, ClipAndScale)
{
    EXPECT_EQ(shape_reward(-5, {RewardMode::Clip}), -1.0);
    EXPECT_EQ(shape_reward(0.25, {RewardMode::Clip}), 0.25);
    EXPECT_EQ(shape_reward(7, {RewardMode::Clip}), 1.0);
    EXPECT_DOUBLE_EQ(shape_reward(3000, {RewardMode::Scale, 0.001}), 3.0);
}

TEST(ShapeReward, ScalePreservesOrderAndCommutesWithSums)
{
    Rng rng(8);
    const RewardShaping s{RewardMode::Scale, 0.001};
    for (int i = 0; i < 1000; ++i) {
        const double a = (rng.uniform() - 0.5) * 1e4, b = (rng.uniform() - 0.5) * 1e4;
        EXPECT_EQ(a < b, shape_reward(a, s) < shape_reward(b, s));
        EXPECT_EQ(a > 0, shape_reward(a, s) > 0);
    }
    std::vector<double> rewards;
    for (int i = 0; i < 200; ++i)
        rewards.push_back(static_cast<double>(rng.below(2000)) - 500);
    double shaped_sum = 0, sum = 0;
    for (double r : rewards) {
        shaped_sum += shape_reward(r, s);
        sum += r;
    }
    EXPECT_NEAR(shaped_sum, shape_reward(sum, s), 1e-9);
}

TEST(EarlyTerminate, WindowExample)
{
    // Demonstration gains 100 at relative step 20; the rollout holds 99.
    std::vector<double> demo(200, 0.0), roll(200, 99.0);
    for (std::size_t t = 20; t < demo.size(); ++t)
        demo[t] = 100.0;
    roll[0] = 0.0;
    std::uint64_t first = 0;
    for (std::uint64_t t = 0; t < 150 && first == 0; ++t)
        if (early_terminate(roll, demo, t, 0, 50, 0.0))
            first = t;
    EXPECT_EQ(first, 70u);
    for (std::uint64_t t = 0; t < 150; ++t)
        EXPECT_FALSE(early_terminate(roll, demo, t, 0, 50, 250.0));
}

TEST(EarlyTerminate, MeasuredFromStartAndGuards)
{
    std::vector<double> demo(300), roll(300);
    for (std::size_t t = 0; t < demo.size(); ++t) {
        demo[t] = t >= 120 ? 500.0 : 400.0;
        roll[t] = 400.0;
    }
    // Start at 100: the demonstration gains 100 at relative step 20.
    EXPECT_FALSE(early_terminate(roll, demo, 169, 100, 50, 0.0));
    EXPECT_TRUE(early_terminate(roll, demo, 170, 100, 50, 0.0));
    for (std::uint64_t t = 100; t < 150; ++t)
        EXPECT_FALSE(early_terminate(roll, demo, t, 100, 50, 0.0));
    const double inf = std::numeric_limits<double>::infinity();
    const auto huge = std::numeric_limits<std::uint64_t>::max();
    for (std::uint64_t t = 100; t < 300; ++t) {
        EXPECT_FALSE(early_terminate(roll, demo, t, 100, 50, inf));
        EXPECT_FALSE(early_terminate(roll, demo, t, 100, huge, 0.0));
    }
    // Past the end of the demonstration its final value is used.
    std::vector<double> longer(400, 400.0);
    EXPECT_TRUE(early_terminate(longer, demo, 399, 100, 50, 0.0));
    EXPECT_THROW(early_terminate(roll, demo, 5, 10, 50, 0.0), ContractViolation);
}

TEST(TruncateDemo, CutsToLastRewardInPrefix)
{
    auto d = scripted_demo({10, 50, 80}, 100);
    EXPECT_EQ(d.score, 3.0);
    auto t = truncate_demo(d, 60, true);
    EXPECT_EQ(t.length(), 50u);
    EXPECT_EQ(t.score, 2.0);
    EXPECT_NO_THROW(t.validate());
    EXPECT_EQ(truncate_demo(d, 60, false).length(), 60u);
    EXPECT_EQ(truncate_demo(d, 80, true).length(), 80u);
    auto same = truncate_demo(d, 1000, false);
    EXPECT_EQ(same.actions, d.actions);
    EXPECT_EQ(same.cum_rewards, d.cum_rewards);
    EXPECT_EQ(same.checkpoints, d.checkpoints);
    EXPECT_THROW(truncate_demo(d, 9, true), ContractViolation);
    EXPECT_THROW(truncate_demo(scripted_demo({}, 30), 100, true), ContractViolation);
    EXPECT_THROW(truncate_demo(d, 0, false), ContractViolation);
}

TEST(Demonstration, SnapshotFillInMatchesReplay)
{
    const auto& a = level1_archive();
    auto env = small_world()();
    auto d = demo_from_archive(*env, a, a.best_index(), 25);
    EXPECT_EQ(d.score, a.best_record().score);
    EXPECT_NO_THROW(d.validate());
    auto replayer = small_world()();
    auto filler = small_world()();
    replayer->set_render_frames(false);
    replayer->reset(0);
    for (std::uint64_t f = 0; f <= d.length(); ++f) {
        EXPECT_EQ(snapshot_at(d, f, *filler), replayer->snapshot()) << "frame " << f;
        if (f < d.length())
            replayer->step(d.actions[static_cast<std::size_t>(f)]);
    }
    EXPECT_THROW(snapshot_at(d, d.length() + 1, *filler), ContractViolation);
}

TEST(SelectDemonstrations, MaxLevelFilterAndShortfall)
{
    std::vector<Archive> archives = {explore_small(0, 300'000), explore_small(1, 300'000), explore_small(2, 2'000)};
    ASSERT_EQ(archives[0].max_level(), 1);
    ASSERT_EQ(archives[1].max_level(), 1);
    ASSERT_EQ(archives[2].max_level(), 0);
    auto demos = select_demonstrations(archives, 2, LevelFilter::MaxLevel, small_world());
    ASSERT_EQ(demos.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(demos[i].level, 1);
        EXPECT_EQ(demos[i].score, archives[i].best_record().score);
    }
    EXPECT_THROW(select_demonstrations(archives, 3, LevelFilter::MaxLevel, small_world()), ShortfallError);
    EXPECT_EQ(select_demonstrations(archives, 3, LevelFilter::Any, small_world()).size(), 3u);
    auto one = select_demonstrations(std::span(archives).subspan(0, 1), 1, LevelFilter::MaxLevel, small_world());
    EXPECT_EQ(one[0].source, archives[0].key_at(archives[0].best_index()).to_string());
}

TEST(BackwardRun, AdvanceIntervalDefaultsToTwoHundredPerDemo)
{
    BackwardConfig c;
    EXPECT_EQ(c.interval_for(1), 200u);
    EXPECT_EQ(c.interval_for(10), 2000u);
    c.advance_interval = 7;
    EXPECT_EQ(c.interval_for(10), 7u);
}

TEST(BackwardRun, OracleReachesZeroInClosedFormAdvances)
{
    const auto& a = level1_archive();
    auto env = small_world()();
    auto demo = demo_from_archive(*env, a, a.best_index());
    const auto L = demo.length();
    for (std::uint64_t shift : {1u, 7u}) {
        auto cfg = deterministic_cfg();
        cfg.start_shift = shift;
        auto res = backward_run({demo}, std::make_unique<ReplayOracleLearner>(std::vector<std::vector<ActionId>>{demo.actions}),
                                small_world(), cfg);
        EXPECT_TRUE(res.finished);
        EXPECT_EQ(res.max_starting_points, std::vector<std::uint64_t>{0});
        const auto advances = (L + shift - 1) / shift;
        std::size_t moved = 0;
        std::uint64_t prev = L;
        for (const auto& row : res.history) {
            EXPECT_EQ(row.success_rate, 1.0);
            moved += row.max_starting_point < prev;
            prev = row.max_starting_point;
        }
        EXPECT_EQ(moved, advances);
        // One more check at 0 confirms the success rate.
        EXPECT_EQ(res.history.size(), advances + 1);
        EXPECT_EQ(res.attempts, (advances + 1) * cfg.advance_interval);
    }
}

TEST(BackwardRun, StartingPointsMonotoneAndWindowed)
{
    const auto& a = level1_archive();
    auto env = small_world()();
    auto demo = truncate_demo(demo_from_archive(*env, a, a.best_index()), a.best_record().traj_len, true);
    BackwardConfig cfg;
    cfg.reward.mode = RewardMode::Scale;
    cfg.advance_interval = 50;
    cfg.budget_frames = 300'000;
    auto res = backward_run({demo, demo}, std::make_unique<TabularLearner>(), small_world(), cfg);
    std::vector<std::uint64_t> last(2, demo.length());
    std::vector<std::uint64_t> checks(2, 0);
    for (const auto& row : res.history) {
        EXPECT_LE(row.max_starting_point, last[row.demo]);
        last[row.demo] = row.max_starting_point;
        ++checks[row.demo];
        const double k = row.success_rate * 50;
        EXPECT_NEAR(k, std::round(k), 1e-9);
    }
    EXPECT_GT(checks[0], 0u);
    EXPECT_GT(checks[1], 0u);
}

TEST(BackwardRun, IndependentOfWorkerCount)
{
    const auto& a = level1_archive();
    auto env = small_world()();
    auto demo = truncate_demo(demo_from_archive(*env, a, a.best_index()), a.best_record().traj_len, true);
    BackwardConfig cfg;
    cfg.advance_interval = 40;
    cfg.budget_frames = 150'000;
    cfg.seed = 5;
    auto one = backward_run({demo}, std::make_unique<TabularLearner>(), small_world(), cfg);
    cfg.workers = 3;
    auto three = backward_run({demo}, std::make_unique<TabularLearner>(), small_world(), cfg);
    EXPECT_EQ(one.history, three.history);
    EXPECT_EQ(one.attempts, three.attempts);
    EXPECT_EQ(PolicyFile::of(*one.policy), PolicyFile::of(*three.policy));
    ASSERT_EQ(one.checkpoints.size(), three.checkpoints.size());
    for (std::size_t i = 0; i < one.checkpoints.size(); ++i)
        EXPECT_EQ(one.checkpoints[i], three.checkpoints[i]);
}

TEST(BackwardRun, RejectsBadInput)
{
    EXPECT_THROW(backward_run({}, std::make_unique<TabularLearner>(), small_world(), {}), ContractViolation);
    BackwardConfig c;
    c.window = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.success_threshold = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.start_shift = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(TabularLearner, BackwardSweepValues)
{
    TabularLearner l({0.5, 0.9, 0.0, 0.0});
    Rollout r;
    r.num_actions = 3;
    r.transitions = {{1, 2, 0.0, 2, false}, {2, 1, 1.0, 3, true}};
    l.update(std::span(&r, 1));
    EXPECT_DOUBLE_EQ((*l.values(2))[1], 0.5);
    EXPECT_DOUBLE_EQ((*l.values(1))[2], 0.5 * 0.9 * 0.5);
    Rng rng(1);
    EXPECT_EQ(l.act({1, nullptr, 0, std::nullopt, 3}, rng, false), 2);
    EXPECT_EQ(l.act({2, nullptr, 0, std::nullopt, 3}, rng, false), 1);
}

TEST(TabularLearner, RandomTieBreakCoversAllActions)
{
    TabularLearner l({0.5, 0.9, 0.0, 0.0});
    Rng rng(2);
    std::set<ActionId> seen;
    for (int i = 0; i < 200; ++i)
        seen.insert(l.act({42, nullptr, 0, std::nullopt, 5}, rng, false));
    EXPECT_EQ(seen.size(), 5u);
}

TEST(PolicyFile, RoundTripAndCorruption)
{
    TabularLearner l;
    Rollout r;
    r.num_actions = 5;
    r.transitions = {{1, 2, 0.5, 2, false}, {2, 4, 1.0, 3, true}};
    l.update(std::span(&r, 1));
    auto file = PolicyFile::of(l, 123, 4);
    auto bytes = file.serialize();
    auto back = PolicyFile::deserialize(bytes);
    EXPECT_EQ(back, file);
    auto restored = back.instantiate();
    EXPECT_EQ(dynamic_cast<TabularLearner&>(*restored), l);
    for (std::size_t i : {std::size_t{0}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
        auto bad = bytes;
        bad[i] ^= 0x40;
        EXPECT_THROW(PolicyFile::deserialize(bad), FormatError) << "byte " << i;
    }
    bytes.pop_back();
    EXPECT_THROW(PolicyFile::deserialize(bytes), FormatError);

    ReplayOracleLearner oracle({{1, 2, 3}, {4}});
    auto of = PolicyFile::of(oracle).instantiate();
    Rng rng(0);
    EXPECT_EQ(of->act({0, nullptr, 2, 0, 5}, rng, false), 3);
    EXPECT_EQ(of->act({0, nullptr, 0, 1, 5}, rng, false), 4);
}

TEST(BestCheckpoint, LowestStartPointsOnlyAndRetestReported)
{
    TabularLearner l;
    std::vector<PolicyFile> c = {PolicyFile::of(l, 100, 9), PolicyFile::of(l, 200, 3), PolicyFile::of(l, 300, 3),
                                 PolicyFile::of(l, 400, 5)};
    std::vector<std::uint64_t> rounds;
    int calls = 0;
    auto eval = [&](const Learner&, std::uint64_t round) {
        rounds.push_back(round);
        ++calls;
        return round == 0 ? 10.0 * calls : -1.0;
    };
    auto pick = best_checkpoint(c, eval);
    EXPECT_EQ(calls, 3);
    EXPECT_EQ(pick.index, 2u);
    EXPECT_EQ(pick.selection_score, 20.0);
    EXPECT_EQ(pick.retest_score, -1.0);
    EXPECT_EQ(rounds, (std::vector<std::uint64_t>{0, 0, 1}));

    auto single = best_checkpoint(std::span(c).subspan(0, 1), eval);
    EXPECT_EQ(single.index, 0u);
    EXPECT_EQ(single.retest_score, -1.0);

    calls = 0;
    best_checkpoint(c, eval, 5, 2);
    EXPECT_EQ(calls, 4);
    EXPECT_THROW(best_checkpoint({}, eval), ContractViolation);
}

TEST(StartPointSolved, Tolerance)
{
    EXPECT_TRUE(start_point_solved(0));
    EXPECT_TRUE(start_point_solved(50));
    EXPECT_FALSE(start_point_solved(51));
}
