#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "binary_io.hpp"
#include "env.hpp"
#include "errors.hpp"

namespace goexplore {

// Handle to an action chain inside a TrajectoryStore. `node` is the last
// action's node (no_node for the empty trajectory).
struct Trajectory {
    static constexpr std::uint32_t no_node = std::numeric_limits<std::uint32_t>::max();

    std::uint32_t node = no_node;
    std::uint64_t length = 0;

    bool operator==(const Trajectory&) const = default;
};

// Append-only pool of (action, parent) nodes. Trajectories that share a
// prefix share its nodes, so extending one is O(1) and never touches
// existing nodes.
class TrajectoryStore {
public:
    struct Node {
        std::uint32_t parent = Trajectory::no_node;
        std::uint8_t action = 0;

        bool operator==(const Node&) const = default;
    };

    Trajectory extend(const Trajectory& t, ActionId action)
    {
        if (action < 0 || action > 255)
            throw ContractViolation("trajectory: action id out of range");
        if (_nodes.size() >= Trajectory::no_node)
            throw ContractViolation("trajectory: node pool exhausted");
        _nodes.push_back({t.node, static_cast<std::uint8_t>(action)});
        return {static_cast<std::uint32_t>(_nodes.size() - 1), t.length + 1};
    }

    Trajectory extend(Trajectory t, const std::vector<ActionId>& actions)
    {
        for (auto a : actions)
            t = extend(t, a);
        return t;
    }

    // Walks the parent chain; throws IntegrityError when the chain does not
    // have exactly t.length nodes.
    std::vector<ActionId> materialize(const Trajectory& t) const
    {
        std::vector<ActionId> out;
        out.reserve(static_cast<std::size_t>(t.length));
        std::uint32_t n = t.node;
        while (n != Trajectory::no_node) {
            if (n >= _nodes.size() || out.size() >= t.length)
                throw IntegrityError("trajectory chain inconsistent with its length");
            out.push_back(_nodes[n].action);
            if (_nodes[n].parent != Trajectory::no_node && _nodes[n].parent >= n)
                throw IntegrityError("trajectory node points forward");
            n = _nodes[n].parent;
        }
        if (out.size() != t.length)
            throw IntegrityError("trajectory chain shorter than its length");
        std::reverse(out.begin(), out.end());
        return out;
    }

    std::size_t size() const noexcept { return _nodes.size(); }
    const std::vector<Node>& nodes() const noexcept { return _nodes; }
    std::vector<Node>& mutable_nodes() noexcept { return _nodes; }

    bool operator==(const TrajectoryStore&) const = default;

    void write(ByteWriter& w) const
    {
        w.put(static_cast<std::uint64_t>(_nodes.size()));
        for (const auto& n : _nodes) {
            w.put(n.parent);
            w.put(n.action);
        }
    }

    static TrajectoryStore read(ByteReader& r)
    {
        TrajectoryStore s;
        auto n = r.get<std::uint64_t>();
        if (n >= Trajectory::no_node)
            throw FormatError("trajectory store: implausible node count");
        s._nodes.resize(static_cast<std::size_t>(n));
        for (auto& node : s._nodes) {
            node.parent = r.get<std::uint32_t>();
            node.action = r.get<std::uint8_t>();
        }
        return s;
    }

private:
    std::vector<Node> _nodes;
};

} // namespace goexplore
