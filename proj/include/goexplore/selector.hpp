#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "archive.hpp"
#include "cell.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace goexplore {

enum class CountAttr : std::size_t { Chosen = 0, ChosenSinceNew = 1, Seen = 2 };

struct SelectionConfig {
    // Indexed by CountAttr.
    std::array<double, 3> weight{0.1, 0.0, 0.3};
    std::array<double, 3> power{0.5, 0.5, 0.5};
    double w_horizontal = 0.0;
    double w_vertical = 0.0;
    double w_more_keys = 0.0;
    // Include the more-keys neighbor slot (key tracking on).
    bool more_keys = true;
    double eps1 = 0.001;
    double eps2 = 0.00001;
    double level_base = 0.1;
    bool domain_mode = false;

    void validate() const
    {
        static constexpr const char* names[] = {"chosen", "chosen_since_new", "seen"};
        for (std::size_t i = 0; i < 3; ++i) {
            if (!(weight[i] >= 0.0))
                throw ConfigError(std::string("selection.w_") + names[i], "must be >= 0");
            if (!(power[i] > 0.0))
                throw ConfigError(std::string("selection.p_") + names[i], "must be > 0");
        }
        if (!(w_horizontal >= 0.0))
            throw ConfigError("selection.w_horizontal", "must be >= 0");
        if (!(w_vertical >= 0.0))
            throw ConfigError("selection.w_vertical", "must be >= 0");
        if (!(w_more_keys >= 0.0))
            throw ConfigError("selection.w_more_keys", "must be >= 0");
        if (!(eps1 > 0.0))
            throw ConfigError("selection.eps1", "must be > 0");
        if (!(eps2 > 0.0))
            throw ConfigError("selection.eps2", "must be > 0");
        if (!(level_base > 0.0))
            throw ConfigError("selection.level_base", "must be > 0");
    }
};

inline double count_subscore(double v, double w, double p, double eps1, double eps2)
{
    if (v < 0)
        throw ContractViolation("count_subscore: negative count");
    return w * std::pow(1.0 / (v + eps1), p) + eps2;
}

inline double count_subscore(const CellRecord& r, CountAttr a, const SelectionConfig& c)
{
    const auto i = static_cast<std::size_t>(a);
    std::uint64_t v = 0;
    switch (a) {
    case CountAttr::Chosen: v = r.times_chosen; break;
    case CountAttr::ChosenSinceNew: v = r.times_chosen_since_new; break;
    case CountAttr::Seen: v = r.times_seen; break;
    }
    return count_subscore(static_cast<double>(v), c.weight[i], c.power[i], c.eps1, c.eps2);
}

inline double neigh_subscore(const CellKey& key, const Archive& archive, const SelectionConfig& c)
{
    if (!c.domain_mode || !key.is_domain())
        return 0.0;
    double s = 0.0;
    for (const auto& n : neighbors(key, c.more_keys)) {
        switch (n.type) {
        case NeighborType::Horizontal:
            if (!archive.contains(n.key))
                s += c.w_horizontal;
            break;
        case NeighborType::Vertical:
            if (!archive.contains(n.key))
                s += c.w_vertical;
            break;
        case NeighborType::MoreKeys:
            if (!archive.has_more_keys_neighbor(key.domain()))
                s += c.w_more_keys;
            break;
        }
    }
    return s;
}

inline double level_weight(int level, int max_level, double base, bool domain_mode = true)
{
    if (!domain_mode || level < 0)
        return 1.0;
    if (level > max_level)
        throw ContractViolation("level_weight: level above max_level");
    return std::pow(base, max_level - level);
}

inline double cell_score(const CellRecord& r, const CellKey& key, const Archive& archive, const SelectionConfig& c)
{
    double cnt = 0.0;
    for (auto a : {CountAttr::Chosen, CountAttr::ChosenSinceNew, CountAttr::Seen})
        cnt += count_subscore(r, a, c);
    const double lw = level_weight(r.level, archive.max_level(), c.level_base, c.domain_mode);
    return lw * (neigh_subscore(key, archive, c) + cnt + 1.0);
}

// Scores of every cell in archive order.
inline std::vector<double> cell_scores(const Archive& archive, const SelectionConfig& c)
{
    std::vector<double> s(archive.size());
    for (std::size_t i = 0; i < archive.size(); ++i)
        s[i] = cell_score(archive.record_at(i), archive.key_at(i), archive, c);
    return s;
}

inline std::vector<double> normalize(std::vector<double> scores)
{
    if (scores.empty())
        throw ContractViolation("cell_probs: empty archive");
    const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
    for (auto& s : scores)
        s /= total;
    return scores;
}

inline std::vector<double> cell_probs(const Archive& archive, const SelectionConfig& c)
{
    return normalize(cell_scores(archive, c));
}

// b independent draws with replacement: one uniform per draw, located in the
// cumulative distribution by binary search.
inline std::vector<std::size_t> sample_batch(const std::vector<double>& probs, std::size_t b, Rng& rng)
{
    if (b < 1)
        throw ContractViolation("sample_batch: b must be >= 1");
    if (probs.empty())
        throw ContractViolation("sample_batch: empty distribution");
    std::vector<double> cum(probs.size());
    std::partial_sum(probs.begin(), probs.end(), cum.begin());
    const double total = cum.back();
    std::vector<std::size_t> out;
    out.reserve(b);
    for (std::size_t i = 0; i < b; ++i) {
        const double u = rng.uniform() * total;
        auto it = std::upper_bound(cum.begin(), cum.end(), u);
        out.push_back(std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), probs.size() - 1));
    }
    return out;
}

} // namespace goexplore
