// goexplore_cli: command-line front end.
//
//   goexplore_cli [global options] explore   [--resume archive.gear]
//   goexplore_cli [global options] robustify --demos a.gear [b.gear ...]
//   goexplore_cli [global options] evaluate  --policy policy.gepl
//   goexplore_cli [global options] replay    --archive archive.gear [--cell best] [--render]
//   goexplore_cli [global options] report    metrics1.csv [metrics2.csv ...]
//
// Settings are layered: preset, config file, GOEXPLORE_<SECTION>_<KEY>
// environment variables, --set, then the dedicated flags.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <goexplore/commands.hpp>
#include <goexplore/experiment.hpp>
#include <goexplore/kv_config.hpp>

using namespace goexplore;

namespace {

struct Globals {
    std::string config;
    std::string preset;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::uint64_t> budget_frames;
    std::optional<std::string> out;
};

ExperimentConfig resolve(const Globals& g, const std::string& budget_key)
{
    KvConfig kv = g.config.empty() ? KvConfig{} : KvConfig::load(g.config);
    if (!g.preset.empty())
        kv.set("experiment", "preset", g.preset);
    kv.apply_env_overrides("GOEXPLORE", known_config_keys(), [](const char* name) { return std::getenv(name); });
    for (const auto& s : g.sets) {
        const auto eq = s.find('=');
        const auto dot = s.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq)
            throw ConfigError(s, "--set expects section.key=value");
        kv.set(KvConfig::trim(s.substr(0, dot)), KvConfig::trim(s.substr(dot + 1, eq - dot - 1)),
               KvConfig::trim(s.substr(eq + 1)));
    }
    if (g.seed)
        for (const char* section : {"explore", "robustify", "eval"})
            kv.set(section, "seed", std::to_string(*g.seed));
    if (g.workers)
        for (const char* section : {"explore", "robustify", "eval"})
            kv.set(section, "workers", std::to_string(*g.workers));
    if (g.budget_frames && !budget_key.empty())
        kv.set(budget_key, "budget_frames", std::to_string(*g.budget_frames));
    if (g.out)
        kv.set("output", "dir", *g.out);
    return load_experiment(kv);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Go-Explore on synthetic deterministic worlds"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "Plain-text configuration file");
    app.add_option("--preset", g.preset, "Named preset applied before the config file");
    app.add_option("--set", g.sets, "Override one setting: section.key=value (repeatable)");
    app.add_option("--seed", g.seed, "Root seed for exploration, robustification and evaluation");
    app.add_option("--workers", g.workers, "Worker threads (results do not depend on it)");
    app.add_option("--budget-frames", g.budget_frames, "Training-frame budget of the command");
    app.add_option("--out", g.out, "Output directory");

    std::optional<std::string> resume;
    auto* explore = app.add_subcommand("explore", "Phase 1: build an archive");
    explore->add_option("--resume", resume, "Continue from an archive checkpoint");

    std::vector<std::string> demos;
    auto* robustify = app.add_subcommand("robustify", "Phase 2: Backward Algorithm on archive demonstrations");
    robustify->add_option("--demos", demos, "Archive checkpoints providing demonstrations")->required();

    std::string policy;
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a policy checkpoint under sticky actions and no-ops");
    evaluate->add_option("--policy", policy, "Policy checkpoint")->required();

    std::string archive, cell = "best";
    bool render = false;
    auto* replay = app.add_subcommand("replay", "Replay an archived cell and verify it");
    replay->add_option("--archive", archive, "Archive checkpoint")->required();
    replay->add_option("--cell", cell, "Cell key, or 'best'");
    replay->add_flag("--render", render, "Print every frame as text");

    std::vector<std::string> inputs;
    auto* report = app.add_subcommand("report", "Aggregate metric CSVs across seeds");
    report->add_option("inputs", inputs, "Metric CSV files, one per seed")->required();

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_code::config;
    }

    try {
        if (*explore)
            return cmd_explore(resolve(g, "explore"), resume, std::cout);
        if (*robustify)
            return cmd_robustify(resolve(g, "robustify"), demos, std::cout);
        if (*evaluate)
            return cmd_evaluate(resolve(g, ""), policy, std::cout);
        if (*replay)
            return cmd_replay(resolve(g, ""), archive, cell, render, std::cout);
        if (*report)
            return cmd_report(inputs, g.out.value_or("report"), g.seed.value_or(0), std::cout);
    }
    catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return exit_code::failure;
}
