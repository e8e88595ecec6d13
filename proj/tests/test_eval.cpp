#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <goexplore/evaluation.hpp>
#include <goexplore/learners.hpp>

#include "scripted_env.hpp"

using namespace goexplore;
using goexplore::testing::ScriptedEnv;

namespace {

class ConstantPolicy final : public Learner {
public:
    explicit ConstantPolicy(ActionId a) : _a(a) {}
    std::string kind() const override { return "constant"; }
    ActionId act(const PolicyInput&, Rng&, bool) const override { return _a; }
    void update(std::span<const Rollout>) override {}
    void save(ByteWriter&) const override {}
    void load(ByteReader&) override {}
    std::unique_ptr<Learner> clone() const override { return std::make_unique<ConstantPolicy>(*this); }

private:
    ActionId _a;
};

double normal(Rng& rng)
{
    const double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::filesystem::path scratch(const std::string& name)
{
    auto p = std::filesystem::temp_directory_path() / ("goexplore_eval_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace

TEST(GrandMean, ConstantScores)
{
    std::vector<std::vector<double>> s(31, std::vector<double>(5, 7.5));
    std::vector<double> per;
    EXPECT_EQ(grand_mean(s, &per), 7.5);
    EXPECT_EQ(per.size(), 31u);
}

TEST(GrandMean, OneZeroGroup)
{
    std::vector<std::vector<double>> s(31, std::vector<double>(5, 31.0));
    s[0].assign(5, 0.0);
    EXPECT_DOUBLE_EQ(grand_mean(s), 30.0);
}

TEST(GrandMean, DiffersFromPooledMeanWithUnevenGroups)
{
    std::vector<std::vector<double>> s = {{0, 0, 0, 0, 0, 0}, {6}};
    EXPECT_DOUBLE_EQ(grand_mean(s), 3.0);
    double pooled = 6.0 / 7.0;
    EXPECT_NE(grand_mean(s), pooled);
}

TEST(GrandMean, InvariantToDuplicatingEveryEpisode)
{
    Rng rng(3);
    std::vector<std::vector<double>> s(31), d(31);
    for (std::size_t n = 0; n < 31; ++n)
        for (int e = 0; e < 5; ++e) {
            const double v = std::round(rng.uniform() * 1000);
            s[n].push_back(v);
            d[n].push_back(v);
            d[n].push_back(v);
        }
    EXPECT_NEAR(grand_mean(s), grand_mean(d), 1e-9);
    EXPECT_THROW(grand_mean({}), ContractViolation);
}

TEST(EvaluatePolicy, NoopCountsAreExact)
{
    // Every agent step earns 3 and the episode lasts 40 steps including the
    // forced no-ops, so group n scores 3 * (40 - n).
    EvalProtocol p;
    p.sticky_p = 0.0;
    auto res = evaluate_policy(ConstantPolicy(3), [] { return std::make_unique<ScriptedEnv>(40); }, p);
    ASSERT_EQ(res.per_noop.size(), 31u);
    for (std::size_t n = 0; n < 31; ++n) {
        ASSERT_EQ(res.scores[n].size(), 5u);
        for (double v : res.scores[n])
            EXPECT_EQ(v, 3.0 * (40.0 - static_cast<double>(n)));
    }
    EXPECT_DOUBLE_EQ(res.grand_mean, 75.0);
}

TEST(EvaluatePolicy, DoNothingScoresZero)
{
    auto res = evaluate_policy(ConstantPolicy(0), [] { return std::make_unique<ScriptedEnv>(60); }, {});
    EXPECT_EQ(res.grand_mean, 0.0);
}

TEST(EvaluatePolicy, TimeLimitInGameFrames)
{
    EvalProtocol p;
    p.sticky_p = 0.0;
    p.max_noops = 0;
    p.episodes = 1;
    p.time_limit = 40; // 10 steps at frame skip 4
    auto res = evaluate_policy(ConstantPolicy(1), [] { return std::make_unique<ScriptedEnv>(1000); }, p);
    EXPECT_EQ(res.grand_mean, 10.0);
}

TEST(EvaluatePolicy, DeterministicPerSeedAndIndependentOfWorkers)
{
    TabularLearner l;
    auto factory = [] { return std::make_unique<ScriptedEnv>(50); };
    EvalProtocol p;
    p.seed = 4;
    auto a = evaluate_policy(l, factory, p);
    auto b = evaluate_policy(l, factory, p);
    p.workers = 3;
    auto c = evaluate_policy(l, factory, p);
    EXPECT_EQ(a.scores, b.scores);
    EXPECT_EQ(a.scores, c.scores);
    p.seed = 5;
    EXPECT_NE(a.scores, evaluate_policy(l, factory, p).scores);
}

TEST(EvalProtocol, Validation)
{
    EvalProtocol p;
    p.episodes = 0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.sticky_p = 1.0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.max_noops = -1;
    EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Quantile, LinearInterpolationAtRank)
{
    std::vector<double> xs = {0, 10};
    EXPECT_DOUBLE_EQ(quantile_sorted(xs, 0.25), 2.5);
    std::vector<double> ys = {1, 2, 3, 4, 5};
    EXPECT_DOUBLE_EQ(quantile_sorted(ys, 0.025), 1.1);
    EXPECT_DOUBLE_EQ(quantile_sorted(ys, 1.0), 5.0);
    EXPECT_THROW(quantile_sorted({}, 0.5), ContractViolation);
}

TEST(Bootstrap, ConstantSamplesGiveDegenerateInterval)
{
    std::vector<double> xs(12, 4.25);
    auto ci = bootstrap_ci(xs);
    EXPECT_EQ(ci.lo, 4.25);
    EXPECT_EQ(ci.hi, 4.25);
}

TEST(Bootstrap, OneTwoThreeMatchesExactResamplingDistribution)
{
    // The mean of three draws from {1,2,3} is 1 with probability 1/27 > 2.5%
    // and 3 likewise, so both tail quantiles sit on the extremes and the
    // pivotal interval around 2 is (1, 3).
    std::vector<double> xs = {1, 2, 3};
    auto ci = bootstrap_ci(xs, 10'000, 0.05, 0);
    EXPECT_NEAR(ci.lo, 1.0, 1e-9);
    EXPECT_NEAR(ci.hi, 3.0, 1e-9);
}

TEST(Bootstrap, MatchesHandRolledResampling)
{
    std::vector<double> xs = {1, 2, 3, 10, -4, 0.5};
    const std::size_t B = 999;
    Rng rng(derive_seed(11, {stream::bootstrap}));
    std::vector<double> stats;
    for (std::size_t b = 0; b < B; ++b) {
        double s = 0;
        for (std::size_t i = 0; i < xs.size(); ++i)
            s += xs[static_cast<std::size_t>(rng.below(xs.size()))];
        stats.push_back(s / static_cast<double>(xs.size()));
    }
    auto kth = [&](double q) {
        auto v = stats;
        const double rank = static_cast<double>(B - 1) * q;
        const auto k = static_cast<std::size_t>(rank);
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
        const double a = v[k];
        const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(k) + 1, v.end());
        return a + (b - a) * (rank - static_cast<double>(k));
    };
    const double theta = (1 + 2 + 3 + 10 - 4 + 0.5) / 6.0;
    auto ci = bootstrap_ci(xs, B, 0.05, 11);
    EXPECT_NEAR(ci.lo, 2 * theta - kth(0.975), 1e-9);
    EXPECT_NEAR(ci.hi, 2 * theta - kth(0.025), 1e-9);
}

TEST(Bootstrap, ShiftEquivariantAndContainsSymmetricEstimate)
{
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> xs, shifted;
        for (int i = 0; i < 15; ++i)
            xs.push_back(normal(rng) * 10);
        const double c = (rng.uniform() - 0.5) * 100;
        for (double x : xs)
            shifted.push_back(x + c);
        auto a = bootstrap_ci(xs, 2000, 0.05, static_cast<std::uint64_t>(trial));
        auto b = bootstrap_ci(shifted, 2000, 0.05, static_cast<std::uint64_t>(trial));
        EXPECT_NEAR(b.lo, a.lo + c, 1e-9);
        EXPECT_NEAR(b.hi, a.hi + c, 1e-9);
        EXPECT_LE(a.lo, a.hi);
    }
    std::vector<double> sym = {-3, -1, 0, 1, 3};
    auto ci = bootstrap_ci(sym, 5000, 0.05, 2);
    EXPECT_LE(ci.lo, 0.0);
    EXPECT_GE(ci.hi, 0.0);
}

TEST(Bootstrap, RejectsTooFewSamples)
{
    std::vector<double> one = {1.0};
    EXPECT_THROW(bootstrap_ci(one), ContractViolation);
    EXPECT_THROW(bootstrap_ci({}), ContractViolation);
    auto band = percentile_band(one);
    EXPECT_EQ(band.lo, 1.0);
    EXPECT_EQ(band.hi, 1.0);
}

TEST(Bootstrap, CoverageNearNominal)
{
    Rng rng(99);
    int covered = 0;
    const int trials = 300;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> xs;
        for (int i = 0; i < 30; ++i)
            xs.push_back(5.0 + normal(rng));
        auto ci = bootstrap_ci(xs, 2000, 0.05, static_cast<std::uint64_t>(t));
        covered += ci.lo <= 5.0 && 5.0 <= ci.hi;
    }
    const double rate = static_cast<double>(covered) / trials;
    EXPECT_GE(rate, 0.88);
    EXPECT_LE(rate, 0.99);
}

TEST(Report, SingleSeedCollapsesBand)
{
    auto dir = scratch("single");
    std::ofstream(dir / "a.csv") << "iteration,game_frames,cells,wall_seconds\n0,100,3,0.1\n1,200,5,0.2\n";
    auto written = emit_report({(dir / "a.csv").string()}, (dir / "out").string());
    ASSERT_EQ(written.size(), 2u);
    auto t = load_csv((dir / "out" / "cells.csv").string());
    EXPECT_EQ(t.columns, (std::vector<std::string>{"index", "game_frames", "mean", "ci_lo", "ci_hi", "seeds"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[1], (std::vector<double>{1, 200, 5, 5, 5, 1}));
    EXPECT_FALSE(std::filesystem::exists(dir / "out" / "wall_seconds.csv"));
}

TEST(Report, TwoSeedsAverageAndTruncateToShortest)
{
    auto dir = scratch("two");
    std::ofstream(dir / "a.csv") << "game_frames,score\n100,2\n200,4\n300,6\n";
    std::ofstream(dir / "b.csv") << "game_frames,score\n100,4\n200,8\n";
    emit_report({(dir / "a.csv").string(), (dir / "b.csv").string()}, (dir / "out").string());
    auto t = load_csv((dir / "out" / "score.csv").string());
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[1][2], 6.0);
    EXPECT_GE(t.rows[1][3], 4.0);
    EXPECT_LE(t.rows[1][4], 8.0);
    EXPECT_LE(t.rows[1][3], t.rows[1][4]);
    EXPECT_EQ(t.rows[1][5], 2.0);
}

TEST(Report, MalformedInputNamesLine)
{
    auto dir = scratch("bad");
    std::ofstream(dir / "a.csv") << "game_frames,score\n100,2\n200,x\n";
    try {
        emit_report({(dir / "a.csv").string()}, (dir / "out").string());
        FAIL() << "expected FormatError";
    }
    catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("a.csv:3"), std::string::npos) << e.what();
    }
    std::ofstream(dir / "b.csv") << "game_frames,other\n100,2\n";
    std::ofstream(dir / "c.csv") << "game_frames,score\n100,2\n";
    EXPECT_THROW(emit_report({(dir / "c.csv").string(), (dir / "b.csv").string()}, (dir / "out").string()),
                 FormatError);
}
