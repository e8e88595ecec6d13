#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "binary_io.hpp"
#include "env.hpp"
#include "errors.hpp"

namespace goexplore {

struct DownscaleParams {
    int width = 11;
    int height = 8;
    // Quantized values range over 0..depth.
    int depth = 8;

    bool operator==(const DownscaleParams&) const = default;

    void validate() const
    {
        if (width < 1)
            throw ConfigError("representation.width", "must be >= 1");
        if (height < 1)
            throw ConfigError("representation.height", "must be >= 1");
        if (depth < 1)
            throw ConfigError("representation.depth", "must be >= 1");
    }
};

struct DownscaledCell {
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::vector<std::uint8_t> values;

    auto operator<=>(const DownscaledCell&) const = default;
};

struct DomainCell {
    int x_bin = 0;
    int y_bin = 0;
    int room = 0;
    int level = 0;
    // Sorted ascending.
    std::vector<int> key_rooms;

    auto operator<=>(const DomainCell&) const = default;
};

// Identity of a conflated region of state space. Equality, ordering and
// hashing are structural.
class CellKey {
public:
    CellKey() = default;
    CellKey(DownscaledCell c) : _v(std::move(c)) {}
    CellKey(DomainCell c) : _v(std::move(c)) {}

    bool is_domain() const noexcept { return std::holds_alternative<DomainCell>(_v); }
    const DomainCell& domain() const { return std::get<DomainCell>(_v); }
    const DownscaledCell& downscaled() const { return std::get<DownscaledCell>(_v); }

    auto operator<=>(const CellKey&) const = default;
    bool operator==(const CellKey&) const = default;

    std::size_t hash() const noexcept
    {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&h](std::uint64_t v) {
            h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        };
        if (is_domain()) {
            const auto& d = domain();
            mix(1);
            mix(static_cast<std::uint32_t>(d.x_bin));
            mix(static_cast<std::uint32_t>(d.y_bin));
            mix(static_cast<std::uint32_t>(d.room));
            mix(static_cast<std::uint32_t>(d.level));
            for (int k : d.key_rooms)
                mix(static_cast<std::uint32_t>(k) + 0x100000000ULL);
        }
        else {
            const auto& c = downscaled();
            mix(2);
            mix(c.width);
            mix(c.height);
            h = fnv1a(c.values, h);
        }
        return static_cast<std::size_t>(h);
    }

    // Canonical text form, parsed back by parse():
    //   domain:<x>,<y>,<room>,<level>,[k1;k2;...]
    //   down:<w>x<h>:<hex digits, one per value>
    std::string to_string() const
    {
        std::ostringstream out;
        if (is_domain()) {
            const auto& d = domain();
            out << "domain:" << d.x_bin << ',' << d.y_bin << ',' << d.room << ',' << d.level << ",[";
            for (std::size_t i = 0; i < d.key_rooms.size(); ++i)
                out << (i ? ";" : "") << d.key_rooms[i];
            out << ']';
        }
        else {
            const auto& c = downscaled();
            out << "down:" << c.width << 'x' << c.height << ':';
            for (auto v : c.values)
                out << "0123456789abcdefghijklmnopqrstuvwxyz"[std::min<int>(v, 35)];
        }
        return out.str();
    }

    static CellKey parse(const std::string& text)
    {
        auto fail = [&] { return FormatError("cannot parse cell key '" + text + "'"); };
        if (text.rfind("domain:", 0) == 0) {
            DomainCell d;
            char c1, c2, c3, c4, br;
            std::istringstream in(text.substr(7));
            if (!(in >> d.x_bin >> c1 >> d.y_bin >> c2 >> d.room >> c3 >> d.level >> c4 >> br) || c1 != ',' ||
                c2 != ',' || c3 != ',' || c4 != ',' || br != '[')
                throw fail();
            std::string rest;
            std::getline(in, rest);
            if (rest.empty() || rest.back() != ']')
                throw fail();
            rest.pop_back();
            std::istringstream keys(rest);
            std::string tok;
            while (std::getline(keys, tok, ';'))
                d.key_rooms.push_back(std::stoi(tok));
            std::sort(d.key_rooms.begin(), d.key_rooms.end());
            return CellKey(std::move(d));
        }
        if (text.rfind("down:", 0) == 0) {
            DownscaledCell c;
            auto colon = text.find(':', 5);
            auto x = text.find('x', 5);
            if (colon == std::string::npos || x == std::string::npos || x > colon)
                throw fail();
            c.width = static_cast<std::uint16_t>(std::stoi(text.substr(5, x - 5)));
            c.height = static_cast<std::uint16_t>(std::stoi(text.substr(x + 1, colon - x - 1)));
            for (char ch : text.substr(colon + 1)) {
                auto pos = std::string_view("0123456789abcdefghijklmnopqrstuvwxyz").find(ch);
                if (pos == std::string_view::npos)
                    throw fail();
                c.values.push_back(static_cast<std::uint8_t>(pos));
            }
            if (c.values.size() != static_cast<std::size_t>(c.width) * c.height)
                throw fail();
            return CellKey(std::move(c));
        }
        throw fail();
    }

    void write(ByteWriter& w) const
    {
        if (is_domain()) {
            const auto& d = domain();
            w.put(std::uint8_t{1});
            w.put(static_cast<std::int32_t>(d.x_bin));
            w.put(static_cast<std::int32_t>(d.y_bin));
            w.put(static_cast<std::int32_t>(d.room));
            w.put(static_cast<std::int32_t>(d.level));
            w.put(static_cast<std::uint32_t>(d.key_rooms.size()));
            for (int k : d.key_rooms)
                w.put(static_cast<std::int32_t>(k));
        }
        else {
            const auto& c = downscaled();
            w.put(std::uint8_t{2});
            w.put(c.width);
            w.put(c.height);
            w.put_bytes(c.values);
        }
    }

    static CellKey read(ByteReader& r)
    {
        auto tag = r.get<std::uint8_t>();
        if (tag == 1) {
            DomainCell d;
            d.x_bin = r.get<std::int32_t>();
            d.y_bin = r.get<std::int32_t>();
            d.room = r.get<std::int32_t>();
            d.level = r.get<std::int32_t>();
            auto n = r.get<std::uint32_t>();
            if (n > 1024)
                throw FormatError("cell key: implausible key count");
            for (std::uint32_t i = 0; i < n; ++i)
                d.key_rooms.push_back(r.get<std::int32_t>());
            return CellKey(std::move(d));
        }
        if (tag == 2) {
            DownscaledCell c;
            c.width = r.get<std::uint16_t>();
            c.height = r.get<std::uint16_t>();
            c.values = r.get_bytes();
            return CellKey(std::move(c));
        }
        throw FormatError("cell key: unknown tag " + std::to_string(tag));
    }

private:
    std::variant<DownscaledCell, DomainCell> _v;
};

struct CellKeyHash {
    std::size_t operator()(const CellKey& k) const noexcept { return k.hash(); }
};

// Area-interpolated downscale followed by quantization to 0..depth.
//
// Output pixel (i, j) covers source columns [i*W/w, (i+1)*W/w) and rows
// [j*H/h, (j+1)*H/h); partially covered source pixels are weighted by their
// overlap. All arithmetic is exact in integers: in coordinates scaled by w
// (resp. h) every boundary is an integer, the block sum is
// S = sum(overlap_x * overlap_y * pixel) over an area of W*H, and
//   q = min(depth, floor(S * (depth + 1) / (256 * W * H))).
inline CellKey downscale_cell(const Frame& frame, const DownscaleParams& params)
{
    if (frame.empty() || frame.width < 1 || frame.height < 1)
        throw ContractViolation("downscale_cell: empty frame");
    params.validate();
    const std::int64_t W = frame.width, H = frame.height, w = params.width, h = params.height;

    // Per output column: list of (source column, overlap in scaled units).
    auto spans = [](std::int64_t src, std::int64_t dst) {
        std::vector<std::vector<std::pair<int, std::int64_t>>> out(static_cast<std::size_t>(dst));
        for (std::int64_t i = 0; i < dst; ++i) {
            const std::int64_t lo = i * src, hi = (i + 1) * src; // in units of 1/dst source pixels
            for (std::int64_t s = lo / dst; s * dst < hi; ++s) {
                const std::int64_t a = std::max(lo, s * dst), b = std::min(hi, (s + 1) * dst);
                if (b > a)
                    out[static_cast<std::size_t>(i)].emplace_back(static_cast<int>(s), b - a);
            }
        }
        return out;
    };
    const auto xs = spans(W, w);
    const auto ys = spans(H, h);

    DownscaledCell cell;
    cell.width = static_cast<std::uint16_t>(w);
    cell.height = static_cast<std::uint16_t>(h);
    cell.values.resize(static_cast<std::size_t>(w * h));
    const std::int64_t denom = 256 * W * H;
    for (std::int64_t j = 0; j < h; ++j)
        for (std::int64_t i = 0; i < w; ++i) {
            std::int64_t sum = 0;
            for (auto [sy, oy] : ys[static_cast<std::size_t>(j)])
                for (auto [sx, ox] : xs[static_cast<std::size_t>(i)])
                    sum += ox * oy * frame.at(sx, sy);
            const std::int64_t q = sum * (params.depth + 1) / denom;
            cell.values[static_cast<std::size_t>(j * w + i)] = static_cast<std::uint8_t>(std::min<std::int64_t>(q, params.depth));
        }
    return CellKey(std::move(cell));
}

// Binned position plus room, level and the sorted rooms of held keys. Bins
// use floor division, so negative coordinates bin downward.
inline CellKey domain_cell(const DomainInfo& info, int grid_size)
{
    if (grid_size < 1)
        throw ContractViolation("domain_cell: grid_size must be >= 1");
    auto floor_div = [](int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
    DomainCell d;
    d.x_bin = floor_div(info.x, grid_size);
    d.y_bin = floor_div(info.y, grid_size);
    d.room = info.room;
    d.level = info.level;
    d.key_rooms = info.key_rooms;
    std::sort(d.key_rooms.begin(), d.key_rooms.end());
    return CellKey(std::move(d));
}

enum class NeighborType : std::uint8_t { Horizontal, Vertical, MoreKeys };

struct Neighbor {
    NeighborType type;
    // For MoreKeys this is the key itself: the neighbor is any archived key at
    // the same position whose key_rooms strictly extend it (see
    // is_more_keys_neighbor).
    CellKey key;
};

// Two horizontal neighbors (x_bin -1, +1), two vertical ones (y_bin -1, +1)
// and, when requested, one more-keys neighbor slot.
inline std::vector<Neighbor> neighbors(const CellKey& key, bool more_keys = true)
{
    if (!key.is_domain())
        throw ContractViolation("neighbors: only defined for domain-feature cells");
    const auto& d = key.domain();
    std::vector<Neighbor> out;
    out.reserve(5);
    for (int dx : {-1, 1}) {
        auto n = d;
        n.x_bin += dx;
        out.push_back({NeighborType::Horizontal, CellKey(std::move(n))});
    }
    for (int dy : {-1, 1}) {
        auto n = d;
        n.y_bin += dy;
        out.push_back({NeighborType::Vertical, CellKey(std::move(n))});
    }
    if (more_keys)
        out.push_back({NeighborType::MoreKeys, key});
    return out;
}

// True when `candidate` sits at the same position, room and level as `base`
// and its key_rooms multiset strictly contains base's.
inline bool is_more_keys_neighbor(const DomainCell& base, const DomainCell& candidate)
{
    if (candidate.x_bin != base.x_bin || candidate.y_bin != base.y_bin || candidate.room != base.room ||
        candidate.level != base.level)
        return false;
    if (candidate.key_rooms.size() <= base.key_rooms.size())
        return false;
    return std::includes(candidate.key_rooms.begin(), candidate.key_rooms.end(), base.key_rooms.begin(),
                         base.key_rooms.end());
}

// How observations become cells for a run.
struct CellRepresentation {
    enum class Mode { Downscale, Domain };

    Mode mode = Mode::Domain;
    DownscaleParams downscale;
    int grid_size = 16;

    bool domain() const noexcept { return mode == Mode::Domain; }

    void validate() const
    {
        downscale.validate();
        if (grid_size < 1)
            throw ConfigError("representation.grid_size", "must be >= 1");
    }

    CellKey operator()(const Observation& obs) const
    {
        if (mode == Mode::Domain) {
            if (!obs.features)
                throw ContractViolation("domain cell representation needs domain features");
            return domain_cell(*obs.features, grid_size);
        }
        return downscale_cell(obs.frame, downscale);
    }

    std::uint64_t hash() const
    {
        ByteWriter w;
        w.put(static_cast<std::uint8_t>(mode));
        w.put(static_cast<std::int32_t>(downscale.width));
        w.put(static_cast<std::int32_t>(downscale.height));
        w.put(static_cast<std::int32_t>(downscale.depth));
        w.put(static_cast<std::int32_t>(grid_size));
        return fnv1a(w.bytes());
    }
};

} // namespace goexplore
