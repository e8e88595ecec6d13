#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "archive.hpp"
#include "env_config.hpp"
#include "errors.hpp"
#include "evaluation.hpp"
#include "experiment.hpp"
#include "explorer.hpp"
#include "learners.hpp"
#include "metrics.hpp"
#include "robustify.hpp"

namespace goexplore {

// Exit statuses shared by every command.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int config = 2;
inline constexpr int integrity = 3;
inline constexpr int shortfall = 4;
} // namespace exit_code

// Maps the library's exception types onto exit statuses.
inline int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const ConfigError*>(&e))
        return exit_code::config;
    if (dynamic_cast<const IntegrityError*>(&e) || dynamic_cast<const FormatError*>(&e))
        return exit_code::integrity;
    if (dynamic_cast<const ShortfallError*>(&e) || dynamic_cast<const ContractViolation*>(&e))
        return exit_code::shortfall;
    return exit_code::failure;
}

namespace detail {

inline std::string out_path(const ExperimentConfig& cfg, const std::string& name)
{
    std::filesystem::create_directories(cfg.out_dir);
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

inline std::uint64_t expected_archive_hash(const ExperimentConfig& cfg)
{
    RoomWorld env(cfg.env);
    return Archive(env.config_hash(), cfg.representation.hash()).config_hash();
}

} // namespace detail

// Phase 1. Writes <out>/archive.gear (every checkpoint_interval iterations
// and at the end) and <out>/metrics.csv. With `resume`, continues from that
// checkpoint; the total budget is explore.budget_frames either way, and new
// metric rows are appended.
inline int cmd_explore(const ExperimentConfig& cfg, const std::optional<std::string>& resume, std::ostream& log)
{
    cfg.validate();
    auto factory = env_factory(cfg.env);
    Explorer ex(factory, cfg.representation, cfg.selection, cfg.explore);
    const auto metrics_path = detail::out_path(cfg, "metrics.csv");
    const auto archive_path = detail::out_path(cfg, "archive.gear");
    std::ofstream metrics;
    if (resume) {
        ex.resume(Archive::load(*resume, ex.archive().config_hash()));
        const bool had = std::filesystem::exists(metrics_path);
        metrics.open(metrics_path, std::ios::app);
        if (!had)
            metrics << MetricRow::csv_header << '\n';
        log << "resumed at iteration " << ex.iteration() << ", " << ex.training_frames() << " training frames\n";
    }
    else {
        metrics.open(metrics_path);
        metrics << MetricRow::csv_header << '\n';
    }
    if (!metrics)
        throw Error("explore: cannot write " + metrics_path);
    ex.run([&](const MetricRow& m) { metrics << m.csv() << '\n' << std::flush; },
           [&](const IterationStats& s) {
               if (cfg.checkpoint_interval > 0 && (s.iteration + 1) % cfg.checkpoint_interval == 0)
                   ex.checkpoint().save(archive_path);
               return true;
           });
    ex.checkpoint().save(archive_path);
    const auto m = ex.metrics();
    log << "explore: " << m.cells << " cells, " << m.rooms << " rooms, max score " << format_double(m.max_score)
        << ", max level " << m.max_level << ", " << m.training_frames << " training frames\n"
        << "wrote " << archive_path << " and " << metrics_path << '\n';
    return exit_code::ok;
}

// Phase 2. Demonstrations come from archive checkpoints. Writes
// <out>/progress.csv, the retained checkpoints <out>/policy_<attempts>.gepl and
// the chosen policy <out>/policy.gepl.
inline int cmd_robustify(const ExperimentConfig& cfg, const std::vector<std::string>& demo_sources,
                         std::ostream& log)
{
    cfg.validate();
    if (demo_sources.empty())
        throw ContractViolation("robustify: no demonstration sources given");
    const auto& r = cfg.robustify;
    const auto expected = detail::expected_archive_hash(cfg);
    std::vector<Archive> archives;
    for (const auto& p : demo_sources)
        archives.push_back(Archive::load(p, expected));
    auto base = env_factory(cfg.env);
    auto demos = select_demonstrations(archives, r.demos, r.level_filter, base, r.demo_checkpoint_every);
    if (r.truncate_frames > 0 || r.truncate_to_last_reward)
        for (auto& d : demos)
            d = truncate_demo(d, r.truncate_frames > 0 ? r.truncate_frames : d.length() + 1,
                              r.truncate_to_last_reward);
    for (std::size_t i = 0; i < demos.size(); ++i)
        log << "demo " << i << ": " << demos[i].source << " score " << format_double(demos[i].score) << " length "
            << demos[i].length() << '\n';

    std::unique_ptr<Learner> learner;
    if (r.learner == "replay_oracle") {
        std::vector<std::vector<ActionId>> acts;
        for (const auto& d : demos)
            acts.push_back(d.actions);
        learner = std::make_unique<ReplayOracleLearner>(std::move(acts));
    }
    else {
        learner = make_learner(r.learner, r.tabular);
    }

    const auto progress_path = detail::out_path(cfg, "progress.csv");
    std::ofstream progress(progress_path);
    progress << ProgressRow::csv_header() << '\n';
    auto res = backward_run(demos, std::move(learner), base, r.backward,
                            [&](const ProgressRow& row) { progress << row.csv() << '\n'; });
    progress.flush();
    log << "robustify: " << res.attempts << " attempts, " << res.training_frames << " training frames, "
        << (res.finished ? "all starting points at 0" : "budget exhausted") << "; max_starting_point";
    for (auto m : res.max_starting_points)
        log << ' ' << m;
    log << '\n';

    for (const auto& c : res.checkpoints)
        c.save(detail::out_path(cfg, "policy_" + std::to_string(c.attempts) + ".gepl"));
    PolicyFile chosen = res.checkpoints.back();
    if (r.select_sample > 0 && res.checkpoints.size() > 1) {
        auto evaluate = [&](const Learner& l, std::uint64_t round) {
            auto p = cfg.eval;
            p.seed = derive_seed(cfg.eval.seed, {stream::backward, round});
            return evaluate_policy(l, base, p).grand_mean;
        };
        auto pick = best_checkpoint(res.checkpoints, evaluate, r.select_sample, r.select_near, r.backward.seed);
        chosen = res.checkpoints[pick.index];
        log << "selected checkpoint at " << chosen.attempts << " attempts: selection score "
            << format_double(pick.selection_score) << ", retest score " << format_double(pick.retest_score) << '\n';
    }
    const auto policy_path = detail::out_path(cfg, "policy.gepl");
    chosen.save(policy_path);
    log << "wrote " << policy_path << " and " << progress_path << '\n';
    return exit_code::ok;
}

// Runs the evaluation protocol. Writes <out>/eval_scores.csv (one row per
// episode) and <out>/eval_noops.csv (one row per no-op count).
inline int cmd_evaluate(const ExperimentConfig& cfg, const std::string& policy_path, std::ostream& log)
{
    cfg.validate();
    auto policy = PolicyFile::load(policy_path).instantiate();
    auto res = evaluate_policy(*policy, env_factory(cfg.env), cfg.eval);
    std::ofstream scores(detail::out_path(cfg, "eval_scores.csv"));
    scores << "noops,episode,score\n";
    for (std::size_t n = 0; n < res.scores.size(); ++n)
        for (std::size_t e = 0; e < res.scores[n].size(); ++e)
            scores << n << ',' << e << ',' << format_double(res.scores[n][e]) << '\n';
    std::ofstream noops(detail::out_path(cfg, "eval_noops.csv"));
    noops << "noops,mean\n";
    for (std::size_t n = 0; n < res.per_noop.size(); ++n)
        noops << n << ',' << format_double(res.per_noop[n]) << '\n';
    log << "grand mean " << format_double(res.grand_mean);
    if (res.per_noop.size() >= 2) {
        auto ci = bootstrap_ci(res.per_noop, 10'000, 0.05, cfg.eval.seed);
        log << " (95% pivotal CI over no-op means " << format_double(ci.lo) << " .. " << format_double(ci.hi) << ")";
    }
    log << '\n';
    return exit_code::ok;
}

// Replays a stored cell ("best" or a cell key in text form) from reset and
// checks score, cell and final state against the archive.
inline int cmd_replay(const ExperimentConfig& cfg, const std::string& archive_path, const std::string& cell,
                      bool render, std::ostream& log)
{
    cfg.validate();
    auto archive = Archive::load(archive_path, detail::expected_archive_hash(cfg));
    std::size_t index = 0;
    if (cell == "best") {
        index = archive.best_index();
    }
    else {
        auto key = CellKey::parse(cell);
        auto found = archive.find(key);
        if (!found)
            throw ContractViolation("replay: cell " + cell + " is not in the archive");
        index = *found;
    }
    RoomWorld env(cfg.env);
    verify_record(env, archive, index, cfg.representation);
    const auto& rec = archive.record_at(index);
    if (render) {
        env.set_render_frames(false);
        env.reset(0);
        log << "frame 0\n" << env.render_text();
        std::uint64_t t = 0;
        for (auto a : archive.materialize(rec)) {
            env.step(a);
            log << "frame " << ++t << " action " << a << '\n' << env.render_text();
        }
    }
    log << "replay ok: " << archive.key_at(index).to_string() << " score " << format_double(rec.score)
        << " length " << rec.traj_len << '\n';
    return exit_code::ok;
}

inline int cmd_report(const std::vector<std::string>& csvs, const std::string& out_dir, std::uint64_t seed,
                      std::ostream& log)
{
    for (const auto& p : emit_report(csvs, out_dir, seed))
        log << "wrote " << p << '\n';
    return exit_code::ok;
}

} // namespace goexplore
