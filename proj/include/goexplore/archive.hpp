#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "binary_io.hpp"
#include "cell.hpp"
#include "env.hpp"
#include "errors.hpp"
#include "trajectory.hpp"

namespace goexplore {

struct CellRecord {
    Trajectory trajectory;
    EnvSnapshot snapshot;
    double score = 0.0;
    // Training frames from reset; always equals trajectory.length.
    std::uint64_t traj_len = 0;
    std::uint64_t times_seen = 1;
    std::uint64_t times_chosen = 0;
    std::uint64_t times_chosen_since_new = 0;
    // From the domain features of the state that produced the record; -1 when
    // the environment exposes none.
    int level = -1;
    int room = -1;

    bool operator==(const CellRecord&) const = default;
};

enum class UpdateOutcome { Added, Improved, Unchanged };

inline const char* to_string(UpdateOutcome o)
{
    switch (o) {
    case UpdateOutcome::Added: return "added";
    case UpdateOutcome::Improved: return "improved";
    case UpdateOutcome::Unchanged: return "unchanged";
    }
    return "?";
}

struct Candidate {
    Trajectory trajectory;
    double score = 0.0;
    std::uint64_t traj_len = 0;
    EnvSnapshot snapshot;
    int level = -1;
    int room = -1;
};

// A candidate replaces an incumbent when it scores higher, or scores the
// same with a strictly shorter trajectory.
inline bool improves(double score, std::uint64_t len, double incumbent_score, std::uint64_t incumbent_len)
{
    return score > incumbent_score || (score == incumbent_score && len < incumbent_len);
}

// Map from CellKey to CellRecord that remembers insertion order, so iteration
// (and therefore selection and checkpoints) is deterministic.
class Archive {
public:
    static constexpr std::uint16_t format_version = 1;

    Archive() = default;
    Archive(std::uint64_t env_hash, std::uint64_t repr_hash) : _env_hash(env_hash), _repr_hash(repr_hash) {}

    std::uint64_t env_hash() const noexcept { return _env_hash; }
    std::uint64_t repr_hash() const noexcept { return _repr_hash; }
    std::uint64_t config_hash() const noexcept { return _env_hash ^ (_repr_hash * 0x9e3779b97f4a7c15ULL); }

    std::size_t size() const noexcept { return _keys.size(); }
    bool empty() const noexcept { return _keys.empty(); }

    const CellKey& key_at(std::size_t i) const { return _keys[i]; }
    const CellRecord& record_at(std::size_t i) const { return _records[i]; }

    std::optional<std::size_t> find(const CellKey& key) const
    {
        auto it = _index.find(key);
        if (it == _index.end())
            return std::nullopt;
        return it->second;
    }

    bool contains(const CellKey& key) const { return _index.count(key) != 0; }

    const CellRecord& at(const CellKey& key) const { return _records[require(key)]; }

    int max_level() const noexcept { return _max_level; }

    // Distinct (level, room) pairs over all records with domain features.
    std::size_t rooms() const noexcept { return _rooms.size(); }
    const std::set<std::pair<int, int>>& room_set() const noexcept { return _rooms; }

    double max_score() const
    {
        double best = 0.0;
        bool any = false;
        for (const auto& r : _records)
            if (!any || r.score > best)
                best = r.score, any = true;
        return best;
    }

    TrajectoryStore& trajectories() noexcept { return _store; }
    const TrajectoryStore& trajectories() const noexcept { return _store; }

    std::vector<ActionId> materialize(const CellRecord& r) const { return _store.materialize(r.trajectory); }

    // What insert_or_update would do, without changing anything.
    UpdateOutcome classify(const CellKey& key, double score, std::uint64_t traj_len) const
    {
        auto i = find(key);
        if (!i)
            return UpdateOutcome::Added;
        const auto& r = _records[*i];
        return improves(score, traj_len, r.score, r.traj_len) ? UpdateOutcome::Improved : UpdateOutcome::Unchanged;
    }

    UpdateOutcome insert_or_update(const CellKey& key, Candidate c)
    {
        if (c.snapshot.config_hash != _env_hash)
            throw FormatError("archive: candidate snapshot belongs to a different environment configuration");
        if (c.traj_len != c.trajectory.length)
            throw ContractViolation("archive: candidate length disagrees with its trajectory");
        auto i = find(key);
        if (!i) {
            CellRecord r;
            r.trajectory = c.trajectory;
            r.snapshot = std::move(c.snapshot);
            r.score = c.score;
            r.traj_len = c.traj_len;
            r.level = c.level;
            r.room = c.room;
            add(key, std::move(r));
            return UpdateOutcome::Added;
        }
        auto& r = _records[*i];
        if (improves(c.score, c.traj_len, r.score, r.traj_len)) {
            r.trajectory = c.trajectory;
            r.snapshot = std::move(c.snapshot);
            r.score = c.score;
            r.traj_len = c.traj_len;
            r.level = c.level;
            r.room = c.room;
            r.times_chosen = 0;
            r.times_chosen_since_new = 0;
            r.times_seen += 1;
            note_level_room(r);
            return UpdateOutcome::Improved;
        }
        r.times_seen += 1;
        return UpdateOutcome::Unchanged;
    }

    // A visit that cannot improve the record: only times_seen moves.
    void mark_seen(const CellKey& key) { _records[require(key)].times_seen += 1; }

    void record_chosen(const CellKey& key) { record_chosen(require(key)); }
    void record_chosen(std::size_t i)
    {
        _records.at(i).times_chosen += 1;
        _records[i].times_chosen_since_new += 1;
    }

    void credit_discovery(const CellKey& key) { credit_discovery(require(key)); }
    void credit_discovery(std::size_t i) { _records.at(i).times_chosen_since_new = 0; }

    // True when some archived domain key at the same position, room and level
    // holds a strict superset of base's keys.
    bool has_more_keys_neighbor(const DomainCell& base) const
    {
        auto it = _positions.find(position_of(base));
        if (it == _positions.end())
            return false;
        for (auto idx : it->second)
            if (is_more_keys_neighbor(base, _keys[idx].domain()))
                return true;
        return false;
    }

    using Filter = std::function<bool(const CellKey&, const CellRecord&)>;

    // Highest score, then shortest trajectory, then smallest key.
    std::size_t best_index(const Filter& filter = {}) const
    {
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < _records.size(); ++i) {
            if (filter && !filter(_keys[i], _records[i]))
                continue;
            if (!best) {
                best = i;
                continue;
            }
            const auto& a = _records[i];
            const auto& b = _records[*best];
            if (a.score > b.score || (a.score == b.score && (a.traj_len < b.traj_len ||
                                                             (a.traj_len == b.traj_len && _keys[i] < _keys[*best]))))
                best = i;
        }
        if (!best)
            throw ShortfallError("archive: no record passes the filter");
        return *best;
    }

    const CellRecord& best_record(const Filter& filter = {}) const { return _records[best_index(filter)]; }

    // Opaque bytes stored alongside the archive (the explorer keeps its resume
    // state here).
    std::vector<std::uint8_t>& extension() noexcept { return _extension; }
    const std::vector<std::uint8_t>& extension() const noexcept { return _extension; }

    // Checkpoint layout (little endian):
    //   "GEAR" u16 version u64 env_hash u64 repr_hash i32 max_level
    //   u64 node_count { u32 parent u8 action }*
    //   u64 cell_count { key record }*
    //   u64 ext_len ext_bytes
    //   u64 fnv1a of everything before it
    // key: see CellKey::write. record: u32 traj_node u64 traj_length f64 score
    //   u64 traj_len u64 seen u64 chosen u64 since_new i32 level i32 room
    //   snapshot (see EnvSnapshot::write).
    std::vector<std::uint8_t> serialize() const
    {
        ByteWriter w;
        w.put_raw("GEAR");
        w.put(format_version);
        w.put(_env_hash);
        w.put(_repr_hash);
        w.put(static_cast<std::int32_t>(_max_level));
        _store.write(w);
        w.put(static_cast<std::uint64_t>(_keys.size()));
        for (std::size_t i = 0; i < _keys.size(); ++i) {
            _keys[i].write(w);
            const auto& r = _records[i];
            w.put(r.trajectory.node);
            w.put(r.trajectory.length);
            w.put(r.score);
            w.put(r.traj_len);
            w.put(r.times_seen);
            w.put(r.times_chosen);
            w.put(r.times_chosen_since_new);
            w.put(static_cast<std::int32_t>(r.level));
            w.put(static_cast<std::int32_t>(r.room));
            r.snapshot.write(w);
        }
        w.put_bytes(_extension);
        w.put(fnv1a(w.bytes()));
        return std::move(w).bytes();
    }

    // Throws FormatError on any corruption, truncation or version mismatch,
    // and when expected_config_hash is given and differs.
    static Archive deserialize(std::span<const std::uint8_t> bytes,
                               std::optional<std::uint64_t> expected_config_hash = std::nullopt)
    {
        if (bytes.size() < 8)
            throw FormatError("archive checkpoint: truncated at byte " + std::to_string(bytes.size()));
        ByteReader r(bytes, "archive checkpoint");
        r.expect_raw("GEAR");
        auto version = r.get<std::uint16_t>();
        if (version != format_version)
            throw FormatError("archive checkpoint: unsupported version " + std::to_string(version));
        Archive a;
        a._env_hash = r.get<std::uint64_t>();
        a._repr_hash = r.get<std::uint64_t>();
        if (expected_config_hash && *expected_config_hash != a.config_hash())
            throw FormatError("archive checkpoint: configuration hash mismatch");
        const auto stored_max_level = r.get<std::int32_t>();
        a._store = TrajectoryStore::read(r);
        auto n = r.get<std::uint64_t>();
        for (std::uint64_t i = 0; i < n; ++i) {
            auto key = CellKey::read(r);
            CellRecord rec;
            rec.trajectory.node = r.get<std::uint32_t>();
            rec.trajectory.length = r.get<std::uint64_t>();
            rec.score = r.get<double>();
            rec.traj_len = r.get<std::uint64_t>();
            rec.times_seen = r.get<std::uint64_t>();
            rec.times_chosen = r.get<std::uint64_t>();
            rec.times_chosen_since_new = r.get<std::uint64_t>();
            rec.level = r.get<std::int32_t>();
            rec.room = r.get<std::int32_t>();
            rec.snapshot = EnvSnapshot::read(r);
            if (rec.traj_len != rec.trajectory.length || rec.times_seen < 1 ||
                rec.times_chosen_since_new > rec.times_chosen ||
                (rec.trajectory.node != Trajectory::no_node && rec.trajectory.node >= a._store.size()))
                throw FormatError("archive checkpoint: inconsistent record " + std::to_string(i));
            if (a.contains(key))
                throw FormatError("archive checkpoint: duplicate cell key");
            a.add(std::move(key), std::move(rec));
        }
        a._extension = r.get_bytes();
        const std::size_t body = r.position();
        const auto stored_sum = r.get<std::uint64_t>();
        if (!r.at_end())
            throw FormatError("archive checkpoint: trailing bytes");
        if (stored_sum != fnv1a(bytes.subspan(0, body)))
            throw FormatError("archive checkpoint: checksum mismatch");
        if (stored_max_level != a._max_level)
            throw FormatError("archive checkpoint: max_level inconsistent with records");
        return a;
    }

    void save(const std::string& path) const { write_file(path, serialize()); }

    static Archive load(const std::string& path, std::optional<std::uint64_t> expected_config_hash = std::nullopt)
    {
        auto bytes = read_file(path);
        return deserialize(bytes, expected_config_hash);
    }

    bool operator==(const Archive& o) const
    {
        return _env_hash == o._env_hash && _repr_hash == o._repr_hash && _keys == o._keys &&
               _records == o._records && _store == o._store && _extension == o._extension;
    }

private:
    struct Position {
        int x, y, room, level;
        bool operator==(const Position&) const = default;
    };
    struct PositionHash {
        std::size_t operator()(const Position& p) const noexcept
        {
            std::uint64_t h = static_cast<std::uint32_t>(p.x);
            h = h * 0x100000001b3ULL ^ static_cast<std::uint32_t>(p.y);
            h = h * 0x100000001b3ULL ^ static_cast<std::uint32_t>(p.room);
            h = h * 0x100000001b3ULL ^ static_cast<std::uint32_t>(p.level);
            return static_cast<std::size_t>(h);
        }
    };

    static Position position_of(const DomainCell& d) { return {d.x_bin, d.y_bin, d.room, d.level}; }

    std::size_t require(const CellKey& key) const
    {
        auto i = find(key);
        if (!i)
            throw ContractViolation("archive: no such cell " + key.to_string());
        return *i;
    }

    void note_level_room(const CellRecord& r)
    {
        if (r.level > _max_level)
            _max_level = r.level;
        if (r.level >= 0 && r.room >= 0)
            _rooms.insert({r.level, r.room});
    }

    void add(CellKey key, CellRecord r)
    {
        const std::size_t idx = _keys.size();
        if (key.is_domain())
            _positions[position_of(key.domain())].push_back(idx);
        note_level_room(r);
        _index.emplace(key, idx);
        _keys.push_back(std::move(key));
        _records.push_back(std::move(r));
    }

    std::uint64_t _env_hash = 0;
    std::uint64_t _repr_hash = 0;
    std::vector<CellKey> _keys;
    std::vector<CellRecord> _records;
    std::unordered_map<CellKey, std::size_t, CellKeyHash> _index;
    std::unordered_map<Position, std::vector<std::size_t>, PositionHash> _positions;
    TrajectoryStore _store;
    int _max_level = 0;
    std::set<std::pair<int, int>> _rooms;
    std::vector<std::uint8_t> _extension;
};

} // namespace goexplore
