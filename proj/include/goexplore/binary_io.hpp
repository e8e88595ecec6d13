#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "errors.hpp"

namespace goexplore {

// 64-bit FNV-1a. Used for configuration hashes and state identifiers; stable
// across platforms because every input goes through ByteWriter first.
inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes,
                           std::uint64_t h = 0xcbf29ce484222325ULL)
{
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL)
{
    return fnv1a(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()), h);
}

// Little-endian append-only encoder.
class ByteWriter {
public:
    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T value)
    {
        if constexpr (std::is_floating_point_v<T>) {
            static_assert(sizeof(T) == 8 || sizeof(T) == 4);
            using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
            put(std::bit_cast<U>(value));
        }
        else {
            using U = std::make_unsigned_t<T>;
            auto u = static_cast<U>(value);
            for (std::size_t i = 0; i < sizeof(T); ++i)
                _bytes.push_back(static_cast<std::uint8_t>((u >> (8 * i)) & 0xff));
        }
    }

    void put_bytes(std::span<const std::uint8_t> bytes)
    {
        put(static_cast<std::uint64_t>(bytes.size()));
        _bytes.insert(_bytes.end(), bytes.begin(), bytes.end());
    }

    void put_string(std::string_view s)
    {
        put_bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    }

    void put_raw(std::string_view s) { _bytes.insert(_bytes.end(), s.begin(), s.end()); }

    const std::vector<std::uint8_t>& bytes() const& { return _bytes; }
    std::vector<std::uint8_t>&& bytes() && { return std::move(_bytes); }

private:
    std::vector<std::uint8_t> _bytes;
};

// Bounds-checked decoder; running off the end throws FormatError.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes, std::string what = "buffer")
        : _bytes(bytes), _what(std::move(what)) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get()
    {
        if constexpr (std::is_floating_point_v<T>) {
            using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
            return std::bit_cast<T>(get<U>());
        }
        else {
            need(sizeof(T));
            using U = std::make_unsigned_t<T>;
            U u = 0;
            for (std::size_t i = 0; i < sizeof(T); ++i)
                u |= static_cast<U>(static_cast<U>(_bytes[_pos + i]) << (8 * i));
            _pos += sizeof(T);
            return static_cast<T>(u);
        }
    }

    std::vector<std::uint8_t> get_bytes()
    {
        auto n = get<std::uint64_t>();
        need(n);
        std::vector<std::uint8_t> out(_bytes.begin() + static_cast<std::ptrdiff_t>(_pos),
                                      _bytes.begin() + static_cast<std::ptrdiff_t>(_pos + n));
        _pos += n;
        return out;
    }

    std::string get_string()
    {
        auto b = get_bytes();
        return {b.begin(), b.end()};
    }

    void expect_raw(std::string_view magic)
    {
        need(magic.size());
        if (std::memcmp(_bytes.data() + _pos, magic.data(), magic.size()) != 0)
            throw FormatError(_what + ": bad magic, expected '" + std::string(magic) + "'");
        _pos += magic.size();
    }

    bool at_end() const noexcept { return _pos == _bytes.size(); }
    std::size_t position() const noexcept { return _pos; }

private:
    void need(std::uint64_t n) const
    {
        if (n > _bytes.size() - _pos)
            throw FormatError(_what + ": truncated at byte " + std::to_string(_pos));
    }

    std::span<const std::uint8_t> _bytes;
    std::size_t _pos = 0;
    std::string _what;
};

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error("failed writing '" + path + "'");
}

inline std::vector<std::uint8_t> read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open '" + path + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace goexplore
