#pragma once

#include <memory>
#include <string>
#include <vector>

#include "errors.hpp"
#include "kv_config.hpp"
#include "room_world.hpp"
#include "wrappers.hpp"

namespace goexplore {

inline RoomWorldSpec default_spec(const std::string& kind)
{
    if (kind == "two_maze")
        return two_maze_spec();
    if (kind == "key_door")
        return key_door_spec();
    if (kind == "key_door_small") {
        auto s = key_door_snake_spec(3, 2, 7, 5);
        s.levels = 2;
        return s;
    }
    if (kind == "deceptive_corridor")
        return deceptive_corridor_spec();
    throw ConfigError("env.kind", "unknown environment '" + kind +
                                      "' (expected two_maze, key_door, key_door_small, deceptive_corridor)");
}

namespace detail {

inline Placement parse_placement(const std::string& v, const std::string& where)
{
    auto parts = KvConfig::split(v, ',');
    if (parts.size() != 3)
        throw ConfigError(where, "expected 'room, x, y', got '" + v + "'");
    return {KvConfig::convert<int>(parts[0], where), KvConfig::convert<int>(parts[1], where),
            KvConfig::convert<int>(parts[2], where)};
}

inline std::vector<Placement> parse_placements(const std::vector<std::string>& values, const std::string& where)
{
    std::vector<Placement> out;
    for (const auto& v : values)
        if (!v.empty() && v != "none")
            out.push_back(parse_placement(v, where));
    return out;
}

} // namespace detail

// Reads the [env] section. `kind` picks the default layout; any list key
// (connection, key, hazard, log, wall, treasure) that appears replaces the
// default list entirely. "none" as a value yields an empty list.
//
//   kind = key_door
//   rooms_x = 6            rooms_y = 4
//   room_w = 9             room_h = 7
//   levels = 2
//   start = 2, 4, 3                       room, x, y
//   connection = 8-9 door                 repeatable
//   key = 19, 4, 3                        repeatable
//   hazard / log / wall = room, x, y      repeatable
//   treasure = 22, 4, 3, 1000, exit       repeatable; "exit" completes the level
//   key_reward, door_reward, log_penalty, key_capacity
//   episode_end = terminate | respawn
//   frame_skip, tile_units, speed, time_limit (game frames), pixels_per_tile, maze_seed
inline RoomWorldSpec read_env_spec(KvConfig& cfg, const std::string& section = "env")
{
    std::string kind = "key_door";
    cfg.read(section, "kind", kind);
    RoomWorldSpec s = default_spec(kind);
    auto where = [&](const char* k) { return KvConfig::path(section, k); };

    cfg.read(section, "rooms_x", s.rooms_x);
    cfg.read(section, "rooms_y", s.rooms_y);
    cfg.read(section, "room_w", s.room_w);
    cfg.read(section, "room_h", s.room_h);
    cfg.read(section, "levels", s.levels);
    cfg.read(section, "maze_seed", s.maze_seed);
    cfg.read(section, "key_reward", s.key_reward);
    cfg.read(section, "door_reward", s.door_reward);
    cfg.read(section, "log_penalty", s.log_penalty);
    cfg.read(section, "key_capacity", s.key_capacity);
    cfg.read(section, "frame_skip", s.frame_skip);
    cfg.read(section, "tile_units", s.tile_units);
    cfg.read(section, "speed", s.speed);
    cfg.read(section, "time_limit", s.time_limit);
    cfg.read(section, "pixels_per_tile", s.pixels_per_tile);

    if (auto v = cfg.get(section, "start"))
        s.start = detail::parse_placement(*v, where("start"));
    if (auto v = cfg.get(section, "episode_end")) {
        auto l = KvConfig::lower(*v);
        if (l == "terminate")
            s.hazard_policy = EpisodeEnd::Terminate;
        else if (l == "respawn")
            s.hazard_policy = EpisodeEnd::Respawn;
        else
            throw ConfigError(where("episode_end"), "expected terminate or respawn, got '" + *v + "'");
    }

    if (cfg.has(section, "connection")) {
        s.connections.clear();
        for (const auto& v : cfg.get_all(section, "connection")) {
            if (v == "none")
                continue;
            auto words = KvConfig::split(v, ' ');
            std::erase(words, std::string{});
            auto ab = KvConfig::split(words.empty() ? v : words[0], '-');
            if (ab.size() != 2 || words.size() > 2 || (words.size() == 2 && words[1] != "door"))
                throw ConfigError(where("connection"), "expected 'a-b' or 'a-b door', got '" + v + "'");
            s.connections.push_back({KvConfig::convert<int>(ab[0], where("connection")),
                                     KvConfig::convert<int>(ab[1], where("connection")), words.size() == 2});
        }
    }
    if (cfg.has(section, "key"))
        s.keys = detail::parse_placements(cfg.get_all(section, "key"), where("key"));
    if (cfg.has(section, "hazard"))
        s.hazards = detail::parse_placements(cfg.get_all(section, "hazard"), where("hazard"));
    if (cfg.has(section, "log"))
        s.logs = detail::parse_placements(cfg.get_all(section, "log"), where("log"));
    if (cfg.has(section, "wall"))
        s.walls = detail::parse_placements(cfg.get_all(section, "wall"), where("wall"));
    if (cfg.has(section, "treasure")) {
        s.treasures.clear();
        for (const auto& v : cfg.get_all(section, "treasure")) {
            if (v == "none")
                continue;
            auto parts = KvConfig::split(v, ',');
            if (parts.size() != 4 && !(parts.size() == 5 && parts[4] == "exit"))
                throw ConfigError(where("treasure"), "expected 'room, x, y, value[, exit]', got '" + v + "'");
            TreasureSpec t;
            t.at = detail::parse_placement(parts[0] + "," + parts[1] + "," + parts[2], where("treasure"));
            t.value = KvConfig::convert<double>(parts[3], where("treasure"));
            t.exit = parts.size() == 5;
            s.treasures.push_back(t);
        }
    }
    // Building validates everything and reports env.* paths.
    build_layout(s);
    return s;
}

// Base environment plus the optional stochastic wrappers (sticky actions
// innermost, no-ops outermost so injected no-ops also pass through the
// sticky layer).
inline std::unique_ptr<Environment> make_env(const RoomWorldSpec& spec, double sticky_p = 0.0, int max_noops = 0)
{
    std::unique_ptr<Environment> env = std::make_unique<RoomWorld>(spec);
    if (sticky_p > 0.0)
        env = wrap_sticky(std::move(env), sticky_p);
    if (max_noops > 0)
        env = wrap_noops(std::move(env), max_noops);
    return env;
}

inline EnvFactory env_factory(const RoomWorldSpec& spec, double sticky_p = 0.0, int max_noops = 0)
{
    auto layout = std::make_shared<const WorldLayout>(build_layout(spec));
    return [layout, sticky_p, max_noops]() {
        std::unique_ptr<Environment> env = std::make_unique<RoomWorld>(*layout);
        if (sticky_p > 0.0)
            env = wrap_sticky(std::move(env), sticky_p);
        if (max_noops > 0)
            env = wrap_noops(std::move(env), max_noops);
        return env;
    };
}

} // namespace goexplore
