#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "env.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace goexplore {

enum class Tile : std::uint8_t { Empty = 0, Wall, Key, Door, Hazard, Log, Treasure };

// Action ids shared by every RoomWorld.
enum MoveAction : ActionId { NoOp = 0, Up = 1, Right = 2, Left = 3, Down = 4 };
inline constexpr int num_move_actions = 5;

// Tile position local to a room.
struct Placement {
    int room = 0;
    int lx = 0;
    int ly = 0;

    bool operator==(const Placement&) const = default;
};

struct Connection {
    int a = 0;
    int b = 0;
    bool door = false;
};

struct TreasureSpec {
    Placement at;
    double value = 0.0;
    // Collecting an exit treasure completes the level.
    bool exit = false;
};

// Everything needed to build a world. Produced from defaults per environment
// kind and then overridden field by field from the plain-text config.
struct RoomWorldSpec {
    std::string kind = "key_door";

    int rooms_x = 6;
    int rooms_y = 4;
    int room_w = 9;
    int room_h = 7;
    int levels = 1;

    Placement start{0, 4, 3};
    std::vector<Connection> connections;
    std::vector<Placement> keys;
    std::vector<Placement> hazards;
    std::vector<Placement> logs;
    std::vector<Placement> walls;
    std::vector<TreasureSpec> treasures;

    // TwoMaze only: rooms 0 and 2 are carved into perfect mazes.
    int maze_seed = 1;

    double key_reward = 100.0;
    double door_reward = 300.0;
    double log_penalty = 1.0;
    int key_capacity = 4;
    EpisodeEnd hazard_policy = EpisodeEnd::Terminate;
    int frame_skip = 4;
    int tile_units = 8;
    int speed = 2;
    std::int64_t time_limit = 400000;
    int pixels_per_tile = 4;
};

struct WorldItem {
    int tile = 0;
    Tile type = Tile::Empty;
    double value = 0.0;
    bool exit = false;
};

// Immutable, fully built tile map plus dynamics parameters.
struct WorldLayout {
    RoomWorldSpec spec;
    std::vector<Tile> tiles;
    std::vector<WorldItem> items;
    std::vector<int> item_at;

    int width() const noexcept { return spec.rooms_x * spec.room_w; }
    int height() const noexcept { return spec.rooms_y * spec.room_h; }
    int num_rooms() const noexcept { return spec.rooms_x * spec.rooms_y; }
    int index(int tx, int ty) const noexcept { return ty * width() + tx; }
    int room_of(int tx, int ty) const noexcept { return (ty / spec.room_h) * spec.rooms_x + tx / spec.room_w; }
    int room_origin_x(int room) const noexcept { return (room % spec.rooms_x) * spec.room_w; }
    int room_origin_y(int room) const noexcept { return (room / spec.rooms_x) * spec.room_h; }

    int global_index(const Placement& p) const { return index(room_origin_x(p.room) + p.lx, room_origin_y(p.room) + p.ly); }

    std::uint64_t hash() const
    {
        ByteWriter w;
        w.put_string(spec.kind);
        for (int v : {spec.rooms_x, spec.rooms_y, spec.room_w, spec.room_h, spec.levels, spec.key_capacity,
                      spec.frame_skip, spec.tile_units, spec.speed, spec.pixels_per_tile})
            w.put(static_cast<std::int32_t>(v));
        w.put(spec.key_reward);
        w.put(spec.door_reward);
        w.put(spec.log_penalty);
        w.put(static_cast<std::uint8_t>(spec.hazard_policy));
        w.put(spec.time_limit);
        w.put(static_cast<std::int32_t>(global_index(spec.start)));
        for (auto t : tiles)
            w.put(static_cast<std::uint8_t>(t));
        for (const auto& it : items) {
            w.put(static_cast<std::int32_t>(it.tile));
            w.put(static_cast<std::uint8_t>(it.type));
            w.put(it.value);
            w.put(static_cast<std::uint8_t>(it.exit));
        }
        return fnv1a(w.bytes());
    }
};

namespace detail {

inline void check_placement(const RoomWorldSpec& s, const Placement& p, const char* what)
{
    if (p.room < 0 || p.room >= s.rooms_x * s.rooms_y)
        throw ConfigError(std::string("env.") + what, "room " + std::to_string(p.room) + " out of range");
    if (p.lx <= 0 || p.lx >= s.room_w - 1 || p.ly <= 0 || p.ly >= s.room_h - 1)
        throw ConfigError(std::string("env.") + what, "tile (" + std::to_string(p.lx) + "," + std::to_string(p.ly) +
                                                           ") is not inside room " + std::to_string(p.room));
}

// Carves a perfect maze (randomized depth-first search) into a room whose
// interior is entirely wall. Maze cells sit at odd local coordinates.
inline void carve_maze(WorldLayout& L, int room, std::uint64_t seed)
{
    const auto& s = L.spec;
    const int cw = (s.room_w - 1) / 2;
    const int ch = (s.room_h - 1) / 2;
    const int ox = L.room_origin_x(room);
    const int oy = L.room_origin_y(room);
    for (int ly = 1; ly < s.room_h - 1; ++ly)
        for (int lx = 1; lx < s.room_w - 1; ++lx)
            L.tiles[L.index(ox + lx, oy + ly)] = Tile::Wall;

    Rng rng(seed);
    std::vector<char> seen(static_cast<std::size_t>(cw * ch), 0);
    std::vector<std::pair<int, int>> stack{{0, 0}};
    seen[0] = 1;
    L.tiles[L.index(ox + 1, oy + 1)] = Tile::Empty;
    const std::array<std::pair<int, int>, 4> dirs{{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};
    while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        std::vector<std::pair<int, int>> options;
        for (auto [dx, dy] : dirs) {
            int nx = cx + dx, ny = cy + dy;
            if (nx >= 0 && ny >= 0 && nx < cw && ny < ch && !seen[static_cast<std::size_t>(ny * cw + nx)])
                options.emplace_back(nx, ny);
        }
        if (options.empty()) {
            stack.pop_back();
            continue;
        }
        auto [nx, ny] = options[rng.below(options.size())];
        seen[static_cast<std::size_t>(ny * cw + nx)] = 1;
        L.tiles[L.index(ox + 1 + cx + nx, oy + 1 + cy + ny)] = Tile::Empty; // wall between
        L.tiles[L.index(ox + 1 + 2 * nx, oy + 1 + 2 * ny)] = Tile::Empty;
        stack.emplace_back(nx, ny);
    }
}

} // namespace detail

inline WorldLayout build_layout(const RoomWorldSpec& s)
{
    if (s.rooms_x < 1 || s.rooms_y < 1)
        throw ConfigError("env.rooms", "room grid must be at least 1x1");
    if (s.room_w < 3 || s.room_h < 3)
        throw ConfigError("env.room_size", "rooms need at least 3x3 tiles");
    if (s.levels < 1)
        throw ConfigError("env.levels", "must be >= 1");
    if (s.frame_skip < 1)
        throw ConfigError("env.frame_skip", "must be >= 1");
    if (s.tile_units < 1 || s.speed < 1 || s.speed > s.tile_units)
        throw ConfigError("env.speed", "need 1 <= speed <= tile_units");
    if (s.time_limit < 1)
        throw ConfigError("env.time_limit", "must be >= 1");
    if (s.key_capacity < 1)
        throw ConfigError("env.key_capacity", "must be >= 1");
    if (s.pixels_per_tile < 1)
        throw ConfigError("env.pixels_per_tile", "must be >= 1");

    WorldLayout L;
    L.spec = s;
    L.tiles.assign(static_cast<std::size_t>(L.width() * L.height()), Tile::Empty);
    for (int ty = 0; ty < L.height(); ++ty)
        for (int tx = 0; tx < L.width(); ++tx) {
            int lx = tx % s.room_w, ly = ty % s.room_h;
            if (lx == 0 || ly == 0 || lx == s.room_w - 1 || ly == s.room_h - 1)
                L.tiles[L.index(tx, ty)] = Tile::Wall;
        }

    if (s.kind == "two_maze") {
        if (s.rooms_x != 3 || s.rooms_y != 1)
            throw ConfigError("env.rooms", "two_maze uses a 3x1 room grid");
        if (s.room_w % 2 == 0 || s.room_h % 2 == 0 || ((s.room_h - 1) / 2) % 2 != 1)
            throw ConfigError("env.room_size", "two_maze rooms need odd sizes with an odd middle row");
        detail::carve_maze(L, 0, derive_seed(static_cast<std::uint64_t>(s.maze_seed), {0}));
        detail::carve_maze(L, 2, derive_seed(static_cast<std::uint64_t>(s.maze_seed), {2}));
        // Hub: a single corridor along the middle row.
        const int mid = s.room_h / 2;
        for (int lx = 1; lx < s.room_w - 1; ++lx)
            for (int ly = 1; ly < s.room_h - 1; ++ly)
                L.tiles[L.index(s.room_w + lx, ly)] = ly == mid ? Tile::Empty : Tile::Wall;
    }

    for (const auto& c : s.connections) {
        const int n = L.num_rooms();
        if (c.a < 0 || c.b < 0 || c.a >= n || c.b >= n)
            throw ConfigError("env.connections", "room out of range in " + std::to_string(c.a) + "-" + std::to_string(c.b));
        int a = std::min(c.a, c.b), b = std::max(c.a, c.b);
        int ax = a % s.rooms_x, ay = a / s.rooms_x, bx = b % s.rooms_x, by = b / s.rooms_x;
        int t1 = 0, t2 = 0;
        if (ay == by && bx == ax + 1) {
            int ty = ay * s.room_h + s.room_h / 2;
            t1 = L.index(ax * s.room_w + s.room_w - 1, ty);
            t2 = L.index(bx * s.room_w, ty);
        }
        else if (ax == bx && by == ay + 1) {
            int tx = ax * s.room_w + s.room_w / 2;
            t1 = L.index(tx, ay * s.room_h + s.room_h - 1);
            t2 = L.index(tx, by * s.room_h);
        }
        else {
            throw ConfigError("env.connections", "rooms " + std::to_string(c.a) + " and " + std::to_string(c.b) +
                                                     " are not adjacent");
        }
        L.tiles[static_cast<std::size_t>(t1)] = Tile::Empty;
        L.tiles[static_cast<std::size_t>(t2)] = c.door ? Tile::Door : Tile::Empty;
        if (c.door)
            L.items.push_back({t2, Tile::Door, s.door_reward, false});
    }

    auto place = [&](const Placement& p, Tile t, const char* what) {
        detail::check_placement(s, p, what);
        L.tiles[static_cast<std::size_t>(L.global_index(p))] = t;
    };
    for (const auto& p : s.walls)
        place(p, Tile::Wall, "walls");
    for (const auto& p : s.hazards)
        place(p, Tile::Hazard, "hazards");
    for (const auto& p : s.logs)
        place(p, Tile::Log, "logs");
    for (const auto& p : s.keys) {
        place(p, Tile::Key, "keys");
        L.items.push_back({L.global_index(p), Tile::Key, s.key_reward, false});
    }
    for (const auto& t : s.treasures) {
        place(t.at, Tile::Treasure, "treasures");
        L.items.push_back({L.global_index(t.at), Tile::Treasure, t.value, t.exit});
    }
    detail::check_placement(s, s.start, "start");
    if (L.tiles[static_cast<std::size_t>(L.global_index(s.start))] != Tile::Empty)
        throw ConfigError("env.start", "start tile must be empty");
    if (L.items.size() > 32)
        throw ConfigError("env", "at most 32 keys, doors and treasures are supported");

    L.item_at.assign(L.tiles.size(), -1);
    for (std::size_t i = 0; i < L.items.size(); ++i) {
        if (L.item_at[static_cast<std::size_t>(L.items[i].tile)] != -1)
            throw ConfigError("env", "two items share a tile");
        L.item_at[static_cast<std::size_t>(L.items[i].tile)] = static_cast<int>(i);
    }
    return L;
}

// --- default specs -------------------------------------------------------

// Start room between two disjoint mazes (west room 0, east room 2).
inline RoomWorldSpec two_maze_spec()
{
    RoomWorldSpec s;
    s.kind = "two_maze";
    s.rooms_x = 3;
    s.rooms_y = 1;
    s.room_w = 19;
    s.room_h = 19;
    s.start = {1, 9, 9};
    s.connections = {{0, 1, false}, {1, 2, false}};
    return s;
}

// 24 rooms over 4 rows of 6, two keys, two doors, lethal hazards and a
// treasure that completes the level. Rooms are numbered row-major:
//
//    0  1 [2] 3  4 K5
//    6  7  8 |9 10 11
//   12 13 14 15 16 17
//   18 K19 20 21 $22 23
//
// Room 2 holds the start. The door between 8 and 9 needs the key from 19;
// the door between 17 and 23 needs the key from 5. The treasure in 22 ends
// the level and the layout repeats.
inline RoomWorldSpec key_door_spec()
{
    RoomWorldSpec s;
    s.kind = "key_door";
    s.rooms_x = 6;
    s.rooms_y = 4;
    s.room_w = 9;
    s.room_h = 7;
    s.levels = 2;
    s.start = {2, 4, 3};
    s.connections = {
        // west region
        {0, 1, false}, {1, 2, false}, {2, 3, false}, {0, 6, false}, {6, 7, false}, {2, 8, false},
        {6, 12, false}, {12, 13, false}, {12, 18, false}, {18, 19, false},
        // first door
        {8, 9, true},
        // east region
        {9, 10, false}, {10, 11, false}, {4, 10, false}, {4, 5, false}, {5, 11, false}, {9, 15, false},
        {15, 16, false}, {16, 17, false}, {14, 15, false}, {14, 20, false}, {20, 21, false},
        // second door and the treasure region
        {17, 23, true}, {22, 23, false},
    };
    s.keys = {{19, 4, 3}, {5, 4, 3}};
    for (int room : {7, 13, 15, 16, 20, 23}) {
        s.hazards.push_back({room, 2, 2});
        s.hazards.push_back({room, 6, 4});
    }
    s.treasures = {{{22, 4, 3}, 1000.0, true}};
    return s;
}

// Fallback key/door layout for arbitrary grids: rooms chained in snake order,
// key halfway along the chain, a door after it and the exit treasure in the
// last room.
inline RoomWorldSpec key_door_snake_spec(int rooms_x, int rooms_y, int room_w, int room_h)
{
    RoomWorldSpec s;
    s.kind = "key_door";
    s.rooms_x = rooms_x;
    s.rooms_y = rooms_y;
    s.room_w = room_w;
    s.room_h = room_h;
    std::vector<int> order;
    for (int r = 0; r < rooms_y; ++r)
        for (int c = 0; c < rooms_x; ++c)
            order.push_back(r * rooms_x + (r % 2 == 0 ? c : rooms_x - 1 - c));
    const int n = static_cast<int>(order.size());
    const int key_at = n / 2 > 0 ? (n - 1) / 2 : 0;
    for (int i = 0; i + 1 < n; ++i)
        s.connections.push_back({order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i + 1)],
                                 i == key_at && n > 1});
    const int cx = room_w / 2, cy = room_h / 2;
    s.start = {order.front(), cx, cy};
    if (n > 1) {
        s.keys = {{order[static_cast<std::size_t>(key_at)], std::max(1, cx - 1), std::max(1, cy - 1)}};
        s.treasures = {{{order.back(), cx, cy}, 1000.0, true}};
    }
    for (int i = 1; i < n; i += 2)
        s.hazards.push_back({order[static_cast<std::size_t>(i)], 1, room_h - 2});
    return s;
}

// Chain of rooms along the top row with two treasure alcoves below it.
// Every room has a full-height log column that costs a point to cross, and
// pits that send the agent back to where it entered the room. The first log
// sits two tiles from the start.
inline RoomWorldSpec deceptive_corridor_spec()
{
    RoomWorldSpec s;
    s.kind = "deceptive_corridor";
    s.rooms_x = 8;
    s.rooms_y = 2;
    s.room_w = 12;
    s.room_h = 6;
    s.levels = 1;
    s.hazard_policy = EpisodeEnd::Respawn;
    s.start = {0, 1, 2};
    for (int r = 0; r + 1 < 8; ++r)
        s.connections.push_back({r, r + 1, false});
    s.connections.push_back({2, 10, false});
    s.connections.push_back({5, 13, false});
    for (int r = 0; r < 8; ++r) {
        const int lx = r == 0 ? 3 : 5;
        for (int ly = 1; ly <= 4; ++ly)
            s.logs.push_back({r, lx, ly});
    }
    // Pits block three of the four corridor rows, alternating the free row.
    for (int r : {1, 3, 4, 6, 7}) {
        const int free_row = r % 2 == 0 ? 1 : 4;
        for (int ly = 1; ly <= 4; ++ly)
            if (ly != free_row)
                s.hazards.push_back({r, 8, ly});
    }
    for (int r : {10, 13}) {
        for (int ly = 1; ly <= 4; ++ly)
            s.logs.push_back({r, 4, ly});
    }
    s.treasures = {
        {{10, 10, 4}, 3000.0, false},
        {{4, 10, 1}, 2000.0, false},
        {{13, 1, 4}, 4000.0, false},
        {{7, 10, 2}, 5000.0, false},
    };
    return s;
}

// --- the environment -----------------------------------------------------

// Grid world measured in "units": tiles are `tile_units` wide and the agent
// moves `speed` units per game frame. With the defaults (8 and 2) one
// training frame at frame_skip 4 moves exactly one tile.
class RoomWorld final : public Environment {
public:
    explicit RoomWorld(WorldLayout layout) : _layout(std::move(layout)), _config_hash(_layout.hash())
    {
        reset_state();
    }

    explicit RoomWorld(const RoomWorldSpec& spec) : RoomWorld(build_layout(spec)) {}

    const WorldLayout& layout() const noexcept { return _layout; }

    std::string name() const override { return _layout.spec.kind; }
    int num_actions() const override { return num_move_actions; }
    int frame_skip() const override { return _layout.spec.frame_skip; }
    EpisodeEnd episode_end() const override { return _layout.spec.hazard_policy; }
    std::uint64_t config_hash() const override { return _config_hash; }

    ResetResult reset(std::uint64_t) override
    {
        reset_state();
        return {observe(), snapshot()};
    }

    StepResult step(ActionId action) override
    {
        if (_done)
            throw ContractViolation(name() + ": step after episode end; reset or restore first");
        if (action < 0 || action >= num_move_actions)
            throw ContractViolation(name() + ": invalid action " + std::to_string(action));
        double reward = 0.0;
        _halt = false;
        for (int f = 0; f < _layout.spec.frame_skip && !_done && !_halt; ++f)
            game_frame(action, reward);
        _counters.game_frames += static_cast<std::uint64_t>(_layout.spec.frame_skip);
        _counters.training_frames += 1;
        if (static_cast<std::int64_t>(_counters.game_frames) >= _layout.spec.time_limit)
            _done = true;
        _score += reward;
        _last_action = action;
        StepResult r;
        r.reward = reward;
        r.done = _done;
        r.info = domain_info();
        if (_render)
            r.obs.frame = render();
        r.obs.features = r.info;
        return r;
    }

    EnvSnapshot snapshot() const override
    {
        EnvSnapshot s;
        s.config_hash = _config_hash;
        s.state_bytes = state_bytes();
        s.cum_score = _score;
        s.training_frames = _counters.training_frames;
        s.game_frames = _counters.game_frames;
        return s;
    }

    void restore(const EnvSnapshot& s) override
    {
        if (s.config_hash != _config_hash)
            throw FormatError(name() + ": snapshot config hash mismatch");
        ByteReader r(s.state_bytes, "room world state");
        if (r.get<std::uint8_t>() != state_version)
            throw FormatError(name() + ": unsupported state version");
        _x = r.get<std::int32_t>();
        _y = r.get<std::int32_t>();
        _level = r.get<std::int32_t>();
        _room = r.get<std::int32_t>();
        _respawn_x = r.get<std::int32_t>();
        _respawn_y = r.get<std::int32_t>();
        _done = r.get<std::uint8_t>() != 0;
        _consumed = r.get<std::uint32_t>();
        auto nkeys = r.get<std::uint8_t>();
        _keys.clear();
        for (int i = 0; i < nkeys; ++i)
            _keys.push_back(r.get<std::int32_t>());
        if (!r.at_end())
            throw FormatError(name() + ": trailing state bytes");
        _score = s.cum_score;
        _counters = {s.game_frames, s.training_frames};
        _last_action = noop_action;
    }

    FrameCounters frame_counters() const override { return _counters; }
    bool done() const override { return _done; }
    double score() const override { return _score; }

    DomainInfo domain_info() const override
    {
        const auto& s = _layout.spec;
        DomainInfo d;
        d.room = _room;
        d.level = _level;
        d.x = _x - _layout.room_origin_x(_room) * s.tile_units;
        d.y = _y - _layout.room_origin_y(_room) * s.tile_units;
        d.key_rooms = _keys;
        return d;
    }

    // Current room only; rooms and levels get distinct floor shades.
    Frame render() const override
    {
        const auto& s = _layout.spec;
        const int ppt = s.pixels_per_tile;
        Frame f;
        f.width = s.room_w * ppt;
        f.height = s.room_h * ppt;
        f.pixels.assign(static_cast<std::size_t>(f.width * f.height), 0);
        const int ox = _layout.room_origin_x(_room), oy = _layout.room_origin_y(_room);
        const auto floor = static_cast<std::uint8_t>(8 + (_room * 23 + _level * 57) % 48);
        const int atx = _x / s.tile_units, aty = _y / s.tile_units;
        for (int ly = 0; ly < s.room_h; ++ly)
            for (int lx = 0; lx < s.room_w; ++lx) {
                std::uint8_t v = floor;
                switch (effective(_layout.index(ox + lx, oy + ly))) {
                case Tile::Wall: v = 120; break;
                case Tile::Key: v = 200; break;
                case Tile::Door: v = 160; break;
                case Tile::Hazard: v = 90; break;
                case Tile::Log: v = 70; break;
                case Tile::Treasure: v = 230; break;
                case Tile::Empty: break;
                }
                if (ox + lx == atx && oy + ly == aty)
                    v = 255;
                for (int py = 0; py < ppt; ++py)
                    for (int px = 0; px < ppt; ++px)
                        f.pixels[static_cast<std::size_t>((ly * ppt + py) * f.width + lx * ppt + px)] = v;
            }
        // Held keys are shown along the top border, like an inventory bar.
        for (std::size_t k = 0; k < _keys.size() && static_cast<int>(k) < s.room_w; ++k)
            for (int px = 0; px < ppt; ++px)
                f.pixels[static_cast<std::size_t>(static_cast<int>(k) * ppt + px)] = 250;
        return f;
    }

    Observation observe() const override
    {
        Observation o;
        if (_render)
            o.frame = render();
        o.features = domain_info();
        return o;
    }

    std::uint64_t state_id() const override { return fnv1a(state_bytes()); }
    void set_render_frames(bool on) override { _render = on; }
    ActionId last_executed_action() const override { return _last_action; }

    std::string render_text() const override
    {
        const auto& s = _layout.spec;
        const int ox = _layout.room_origin_x(_room), oy = _layout.room_origin_y(_room);
        const int atx = _x / s.tile_units, aty = _y / s.tile_units;
        std::ostringstream out;
        out << "room " << _room << " level " << _level << " score " << _score << " keys " << _keys.size() << "\n";
        for (int ly = 0; ly < s.room_h; ++ly) {
            for (int lx = 0; lx < s.room_w; ++lx) {
                char c = ' ';
                switch (effective(_layout.index(ox + lx, oy + ly))) {
                case Tile::Wall: c = '#'; break;
                case Tile::Key: c = 'k'; break;
                case Tile::Door: c = 'D'; break;
                case Tile::Hazard: c = 'x'; break;
                case Tile::Log: c = '='; break;
                case Tile::Treasure: c = '$'; break;
                case Tile::Empty: break;
                }
                if (ox + lx == atx && oy + ly == aty)
                    c = '@';
                out << c;
            }
            out << '\n';
        }
        return out.str();
    }

    // Tile the agent stands on, in global tile coordinates.
    std::pair<int, int> agent_tile() const
    {
        return {_x / _layout.spec.tile_units, _y / _layout.spec.tile_units};
    }

private:
    static constexpr std::uint8_t state_version = 1;

    void reset_state()
    {
        const auto& s = _layout.spec;
        const int half = s.tile_units / 2;
        _x = (_layout.room_origin_x(s.start.room) + s.start.lx) * s.tile_units + half - half % s.speed;
        _y = (_layout.room_origin_y(s.start.room) + s.start.ly) * s.tile_units + half - half % s.speed;
        _room = s.start.room;
        _respawn_x = _x;
        _respawn_y = _y;
        _level = 0;
        _keys.clear();
        _consumed = 0;
        _done = false;
        _score = 0.0;
        _counters = {};
        _last_action = noop_action;
    }

    std::vector<std::uint8_t> state_bytes() const
    {
        ByteWriter w;
        w.put(state_version);
        w.put(static_cast<std::int32_t>(_x));
        w.put(static_cast<std::int32_t>(_y));
        w.put(static_cast<std::int32_t>(_level));
        w.put(static_cast<std::int32_t>(_room));
        w.put(static_cast<std::int32_t>(_respawn_x));
        w.put(static_cast<std::int32_t>(_respawn_y));
        w.put(static_cast<std::uint8_t>(_done));
        w.put(_consumed);
        w.put(static_cast<std::uint8_t>(_keys.size()));
        for (int k : _keys)
            w.put(static_cast<std::int32_t>(k));
        return std::move(w).bytes();
    }

    Tile effective(int idx) const
    {
        Tile t = _layout.tiles[static_cast<std::size_t>(idx)];
        if (t == Tile::Key || t == Tile::Door || t == Tile::Treasure) {
            int item = _layout.item_at[static_cast<std::size_t>(idx)];
            if (item >= 0 && (_consumed >> item) & 1u)
                return Tile::Empty;
        }
        return t;
    }

    // One game frame. The agent is a tile-sized box around (_x, _y): walls and
    // doors block at its leading edge, items trigger when its centre enters a
    // new tile. Teleports (respawn, next level) end the current training frame.
    void game_frame(ActionId action, double& reward)
    {
        if (action == NoOp)
            return;
        const auto& s = _layout.spec;
        static constexpr std::array<int, 5> dx{0, 0, 1, -1, 0};
        static constexpr std::array<int, 5> dy{0, -1, 0, 0, 1};
        const int ax = dx[static_cast<std::size_t>(action)], ay = dy[static_cast<std::size_t>(action)];
        const int nx = _x + ax * s.speed;
        const int ny = _y + ay * s.speed;
        const int half = s.tile_units / 2;
        const int lead_x = ax > 0 ? nx + s.tile_units - half - 1 : ax < 0 ? nx - half : nx;
        const int lead_y = ay > 0 ? ny + s.tile_units - half - 1 : ay < 0 ? ny - half : ny;
        const int lead_idx = _layout.index(lead_x / s.tile_units, lead_y / s.tile_units);
        const Tile lead = effective(lead_idx);
        if (lead == Tile::Wall)
            return;
        if (lead == Tile::Door) {
            if (_keys.empty())
                return;
            _keys.erase(_keys.begin());
            _consumed |= 1u << _layout.item_at[static_cast<std::size_t>(lead_idx)];
            reward += s.door_reward;
        }
        const int old_idx = _layout.index(_x / s.tile_units, _y / s.tile_units);
        _x = nx;
        _y = ny;
        const int ntx = nx / s.tile_units, nty = ny / s.tile_units;
        const int idx = _layout.index(ntx, nty);
        if (idx == old_idx)
            return;
        const int room = _layout.room_of(ntx, nty);
        if (room != _room) {
            _room = room;
            _respawn_x = ntx * s.tile_units + half - half % s.speed;
            _respawn_y = nty * s.tile_units + half - half % s.speed;
        }
        switch (effective(idx)) {
        case Tile::Key:
            if (static_cast<int>(_keys.size()) < s.key_capacity) {
                _keys.push_back(_room);
                _consumed |= 1u << _layout.item_at[static_cast<std::size_t>(idx)];
                reward += s.key_reward;
            }
            break;
        case Tile::Treasure: {
            const auto& item = _layout.items[static_cast<std::size_t>(_layout.item_at[static_cast<std::size_t>(idx)])];
            _consumed |= 1u << _layout.item_at[static_cast<std::size_t>(idx)];
            reward += item.value;
            if (item.exit) {
                advance_level();
                _halt = true;
            }
            break;
        }
        case Tile::Log:
            reward -= s.log_penalty;
            break;
        case Tile::Hazard:
            if (s.hazard_policy == EpisodeEnd::Terminate) {
                _done = true;
            }
            else {
                _x = _respawn_x;
                _y = _respawn_y;
                _halt = true;
            }
            break;
        default:
            break;
        }
    }

    void advance_level()
    {
        ++_level;
        if (_level >= _layout.spec.levels) {
            _done = true;
            return;
        }
        const int level = _level;
        const double score = _score;
        const auto counters = _counters;
        reset_state();
        _level = level;
        _score = score;
        _counters = counters;
    }

    WorldLayout _layout;
    std::uint64_t _config_hash;

    int _x = 0, _y = 0;
    int _room = 0;
    int _level = 0;
    int _respawn_x = 0, _respawn_y = 0;
    std::vector<int> _keys;
    std::uint32_t _consumed = 0;
    bool _done = false;
    double _score = 0.0;
    FrameCounters _counters;
    ActionId _last_action = noop_action;
    bool _halt = false;
    bool _render = true;
};

// Highest total reward any action sequence can collect in one episode,
// ignoring the time limit. Tiles are the search unit, so the world must move
// one tile per training frame (speed * frame_skip == tile_units). Respawn
// teleports are not used as shortcuts.
//
// Within one (level, consumed-items) layer every move has a non-positive
// reward, so each layer is a multi-source Dijkstra; layers are processed in
// increasing mask order because consuming items only adds bits.
inline double max_attainable_score(const WorldLayout& L)
{
    const auto& s = L.spec;
    if (s.speed * s.frame_skip != s.tile_units)
        throw ContractViolation("max_attainable_score needs one tile per training frame");
    const std::size_t nitems = L.items.size();
    if (nitems > 16)
        throw ContractViolation("max_attainable_score supports at most 16 items");
    const std::size_t nmasks = std::size_t{1} << nitems;
    const std::size_t ntiles = L.tiles.size();
    const double neg_inf = -std::numeric_limits<double>::infinity();
    const int start = L.global_index(s.start);

    auto held_keys = [&](std::uint32_t mask) {
        int held = 0;
        for (std::size_t i = 0; i < nitems; ++i)
            if ((mask >> i) & 1u) {
                if (L.items[i].type == Tile::Key)
                    ++held;
                else if (L.items[i].type == Tile::Door)
                    --held;
            }
        return held;
    };

    double best = 0.0;
    std::vector<double> entry(static_cast<std::size_t>(s.levels) * nmasks * ntiles, neg_inf);
    auto slot = [&](int level, std::size_t mask, std::size_t tile) -> double& {
        return entry[(static_cast<std::size_t>(level) * nmasks + mask) * ntiles + tile];
    };
    slot(0, 0, static_cast<std::size_t>(start)) = 0.0;

    const std::array<int, 4> ddx{0, 1, -1, 0}, ddy{-1, 0, 0, 1};
    for (int level = 0; level < s.levels; ++level)
        for (std::size_t mask = 0; mask < nmasks; ++mask) {
            using Node = std::pair<double, std::size_t>;
            std::priority_queue<Node> pq;
            std::vector<double> value(ntiles, neg_inf);
            for (std::size_t t = 0; t < ntiles; ++t)
                if (slot(level, mask, t) > neg_inf) {
                    value[t] = slot(level, mask, t);
                    pq.push({value[t], t});
                }
            const int held = held_keys(static_cast<std::uint32_t>(mask));
            while (!pq.empty()) {
                auto [v, t] = pq.top();
                pq.pop();
                if (v < value[t])
                    continue;
                best = std::max(best, v);
                const int tx = static_cast<int>(t) % L.width(), ty = static_cast<int>(t) / L.width();
                for (int d = 0; d < 4; ++d) {
                    const int nx = tx + ddx[static_cast<std::size_t>(d)], ny = ty + ddy[static_cast<std::size_t>(d)];
                    if (nx < 0 || ny < 0 || nx >= L.width() || ny >= L.height())
                        continue;
                    const auto nt = static_cast<std::size_t>(L.index(nx, ny));
                    Tile tile = L.tiles[nt];
                    const int item = L.item_at[nt];
                    if (item >= 0 && ((mask >> item) & 1u))
                        tile = Tile::Empty;
                    switch (tile) {
                    case Tile::Wall:
                    case Tile::Hazard:
                        break;
                    case Tile::Empty:
                        if (v > value[nt]) {
                            value[nt] = v;
                            pq.push({v, nt});
                        }
                        break;
                    case Tile::Log:
                        if (v - s.log_penalty > value[nt]) {
                            value[nt] = v - s.log_penalty;
                            pq.push({value[nt], nt});
                        }
                        break;
                    case Tile::Door:
                        if (held > 0) {
                            double& e = slot(level, mask | (std::size_t{1} << item), nt);
                            e = std::max(e, v + L.items[static_cast<std::size_t>(item)].value);
                        }
                        break;
                    case Tile::Key: {
                        if (held < s.key_capacity) {
                            double& e = slot(level, mask | (std::size_t{1} << item), nt);
                            e = std::max(e, v + L.items[static_cast<std::size_t>(item)].value);
                        }
                        else if (v > value[nt]) {
                            value[nt] = v;
                            pq.push({v, nt});
                        }
                        break;
                    }
                    case Tile::Treasure: {
                        const auto& it = L.items[static_cast<std::size_t>(item)];
                        const double nv = v + it.value;
                        if (it.exit) {
                            best = std::max(best, nv);
                            if (level + 1 < s.levels) {
                                double& e = slot(level + 1, 0, static_cast<std::size_t>(start));
                                e = std::max(e, nv);
                            }
                        }
                        else {
                            double& e = slot(level, mask | (std::size_t{1} << item), nt);
                            e = std::max(e, nv);
                        }
                        break;
                    }
                    }
                }
            }
        }
    return best;
}

} // namespace goexplore
