#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "errors.hpp"

namespace goexplore {

using ActionId = int;

// Action 0 is "do nothing" in every environment.
inline constexpr ActionId noop_action = 0;

// Features a synthetic environment exposes directly (the role pixel
// classifiers play for real games). Positions are in environment units and
// local to the current room.
struct DomainInfo {
    int x = 0;
    int y = 0;
    int room = 0;
    int level = 0;
    std::vector<int> key_rooms;

    bool operator==(const DomainInfo&) const = default;
};

// Single-channel image, row-major, intensities 0..255.
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    bool empty() const noexcept { return pixels.empty(); }
    bool operator==(const Frame&) const = default;
};

struct Observation {
    Frame frame;
    std::optional<DomainInfo> features;

    bool operator==(const Observation&) const = default;
};

struct FrameCounters {
    std::uint64_t game_frames = 0;
    std::uint64_t training_frames = 0;

    bool operator==(const FrameCounters&) const = default;
};

// Full environment state. `state_bytes` is opaque to everything but the
// environment that produced it; `config_hash` ties it to that environment's
// configuration.
//
// Wire format (little endian):
//   "GESN" u16 version u64 config_hash f64 cum_score
//   u64 training_frames u64 game_frames u64 len bytes[len]
struct EnvSnapshot {
    static constexpr std::uint16_t format_version = 1;

    std::uint64_t config_hash = 0;
    std::vector<std::uint8_t> state_bytes;
    double cum_score = 0.0;
    std::uint64_t training_frames = 0;
    std::uint64_t game_frames = 0;

    bool operator==(const EnvSnapshot&) const = default;

    void write(ByteWriter& w) const
    {
        w.put_raw("GESN");
        w.put(format_version);
        w.put(config_hash);
        w.put(cum_score);
        w.put(training_frames);
        w.put(game_frames);
        w.put_bytes(state_bytes);
    }

    static EnvSnapshot read(ByteReader& r)
    {
        r.expect_raw("GESN");
        auto version = r.get<std::uint16_t>();
        if (version != format_version)
            throw FormatError("snapshot: unsupported version " + std::to_string(version));
        EnvSnapshot s;
        s.config_hash = r.get<std::uint64_t>();
        s.cum_score = r.get<double>();
        s.training_frames = r.get<std::uint64_t>();
        s.game_frames = r.get<std::uint64_t>();
        s.state_bytes = r.get_bytes();
        return s;
    }

    std::vector<std::uint8_t> serialize() const
    {
        ByteWriter w;
        write(w);
        return std::move(w).bytes();
    }

    static EnvSnapshot deserialize(std::span<const std::uint8_t> bytes)
    {
        ByteReader r(bytes, "snapshot");
        auto s = read(r);
        if (!r.at_end())
            throw FormatError("snapshot: trailing bytes");
        return s;
    }
};

struct StepResult {
    Observation obs;
    double reward = 0.0;
    bool done = false;
    DomainInfo info;
};

struct ResetResult {
    Observation obs;
    EnvSnapshot snapshot;
};

// What happens when the agent touches a lethal hazard.
enum class EpisodeEnd { Terminate, Respawn };

// Deterministic, snapshot-restorable environment. Instances are owned by a
// single thread; snapshots are plain values and may be shared freely.
class Environment {
public:
    virtual ~Environment() = default;

    virtual std::string name() const = 0;
    virtual int num_actions() const = 0;
    virtual int frame_skip() const = 0;
    virtual EpisodeEnd episode_end() const = 0;
    virtual std::uint64_t config_hash() const = 0;

    // The seed only affects stochastic wrappers; base environments are fully
    // deterministic.
    virtual ResetResult reset(std::uint64_t seed) = 0;

    // Advances frame_skip game frames and one training frame. Throws
    // ContractViolation when the episode is already over.
    virtual StepResult step(ActionId action) = 0;

    virtual EnvSnapshot snapshot() const = 0;

    // Throws FormatError when the snapshot came from a differently configured
    // environment.
    virtual void restore(const EnvSnapshot& snapshot) = 0;

    virtual FrameCounters frame_counters() const = 0;
    virtual bool done() const = 0;
    virtual double score() const = 0;
    virtual DomainInfo domain_info() const = 0;
    virtual Frame render() const = 0;
    virtual Observation observe() const = 0;

    // Identifier of the discrete environment state, excluding score and frame
    // counters. Tabular learners key on it.
    virtual std::uint64_t state_id() const = 0;

    // When disabled, StepResult::obs carries no frame (domain features only).
    virtual void set_render_frames(bool on) = 0;

    // Reseeds the stochastic wrappers of this stack without touching state.
    virtual void seed(std::uint64_t) {}

    // Action actually executed by the last step (differs from the submitted
    // one under sticky actions).
    virtual ActionId last_executed_action() const = 0;

    // Multi-line text rendering of the current room.
    virtual std::string render_text() const = 0;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

} // namespace goexplore
