#pragma once

#include <cstdint>
#include <vector>

#include "env.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace goexplore {

struct GreedyResult {
    double score = 0.0;
    std::uint64_t frames = 0;
    std::vector<ActionId> actions;
};

// Myopic reward-greedy agent: before every step it tries each action from a
// snapshot, then takes one with the highest immediate reward, choosing
// uniformly among ties. Runs until the episode ends or max_frames.
inline GreedyResult greedy_baseline(Environment& env, std::uint64_t max_frames, std::uint64_t seed)
{
    if (max_frames < 1)
        throw ContractViolation("greedy_baseline: max_frames must be >= 1");
    env.set_render_frames(false);
    env.reset(seed);
    Rng rng(derive_seed(seed, {stream::rollout}));
    GreedyResult out;
    const int n = env.num_actions();
    std::vector<ActionId> best;
    while (!env.done() && out.frames < max_frames) {
        const auto here = env.snapshot();
        double top = 0;
        best.clear();
        for (ActionId a = 0; a < n; ++a) {
            env.restore(here);
            const double r = env.step(a).reward;
            if (best.empty() || r > top) {
                top = r;
                best.assign(1, a);
            }
            else if (r == top) {
                best.push_back(a);
            }
        }
        env.restore(here);
        const auto a = best[static_cast<std::size_t>(rng.below(best.size()))];
        env.step(a);
        out.actions.push_back(a);
        ++out.frames;
    }
    out.score = env.score();
    return out;
}

} // namespace goexplore
