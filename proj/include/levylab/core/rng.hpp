#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace levylab {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Single-owner random stream. Streams for Monte Carlo paths are derived from
/// (seed, index) by hashing the pair with splitmix64 and seeding a 64-bit
/// Mersenne twister, so the stream for path i is independent of how many
/// workers run or in which order paths are scheduled.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    static RngStream derive(std::uint64_t seed, std::uint64_t index) {
        return RngStream(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
    }

    /// Uniform on [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0,1].
    double uniform_open0() { return 1.0 - uniform(); }

    double exponential(double rate) { return -std::log(uniform_open0()) / rate; }

    double normal() { return std::normal_distribution<double>{}(engine_); }

    std::uint64_t next() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace levylab
