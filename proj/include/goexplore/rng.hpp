#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace goexplore {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from a root seed and a path of integers,
// e.g. derive_seed(seed, {iteration, worker}).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
{
    std::uint64_t h = splitmix64(seed);
    for (auto p : path)
        h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

// Stream tags so that streams derived from the same root never collide.
namespace stream {
inline constexpr std::uint64_t select = 0x53454c4543540000ULL;
inline constexpr std::uint64_t rollout = 0x524f4c4c4f555400ULL;
inline constexpr std::uint64_t sticky = 0x535449434b590000ULL;
inline constexpr std::uint64_t noops = 0x4e4f4f5053000000ULL;
inline constexpr std::uint64_t eval = 0x4556414c00000000ULL;
inline constexpr std::uint64_t backward = 0x4241434b00000000ULL;
inline constexpr std::uint64_t bootstrap = 0x424f4f5400000000ULL;
} // namespace stream

// mt19937_64 with fixed, documented conversions so every draw is reproducible
// bit-for-bit independent of the standard library's distribution classes:
//   uniform()  = (next() >> 11) * 2^-53                    in [0, 1)
//   below(n)   = Lemire multiply-shift with rejection      in [0, n)
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : _engine(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() { return _engine(); }

    std::uint64_t next() { return _engine(); }

    double uniform() { return static_cast<double>(_engine() >> 11) * 0x1.0p-53; }

    std::uint64_t below(std::uint64_t n)
    {
        // n == 0 is a caller bug; return 0 rather than loop forever.
        if (n == 0)
            return 0;
        unsigned __int128 m = static_cast<unsigned __int128>(_engine()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(_engine()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 _engine;
};

} // namespace goexplore
