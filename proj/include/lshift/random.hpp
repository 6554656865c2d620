#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace lshift {

using Engine = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// Hash a root seed and a path of integer keys into one 64-bit seed.
///
/// Streams are addressed by position, never by draw order: the stream for
/// (seed, {3, 1}) is the same no matter which thread asks for it or what
/// was drawn before. Every parallel loop in the library keys its streams
/// this way so results do not depend on the schedule.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
{
    std::uint64_t h = detail::splitmix64(seed ^ 0x5a17c0de5eed1234ULL);
    for (std::uint64_t key : path) h = detail::splitmix64(h ^ detail::splitmix64(key + 0x632be59bd9b4e019ULL));
    return h;
}

inline Engine make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
{
    return Engine(derive_seed(seed, path));
}

// Stream tags, so unrelated consumers of one root seed never collide.
namespace stream_tag {
inline constexpr std::uint64_t train_data = 1;
inline constexpr std::uint64_t test_data = 2;
inline constexpr std::uint64_t bootstrap = 10;
inline constexpr std::uint64_t calibration_pass = 11;
inline constexpr std::uint64_t simulation = 20;
inline constexpr std::uint64_t study_bootstrap = 21;
} // namespace stream_tag

inline double standard_normal(Engine& rng)
{
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

inline double uniform01(Engine& rng)
{
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

inline bool bernoulli(Engine& rng, double p) { return uniform01(rng) < p; }

inline std::size_t uniform_index(Engine& rng, std::size_t n)
{
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(rng);
}

} // namespace lshift
