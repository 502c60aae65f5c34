// Counter-based seeded PRNG for deterministic simulation.
//
// Every stochastic operation in the library takes an explicit (seed, stream)
// pair, so runs are reproducible and independent substreams never share
// generator state. The core is splitmix64; all samplers are hand-rolled on
// top of it, so sequences are identical across platforms and standard-library
// versions.

#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace underiv {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer (Steele, Lea, Flood 2014).
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace detail

// Derives an independent seed from a base seed and up to two stream tags.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t h = detail::mix64(seed + detail::kGolden);
    h = detail::mix64(h ^ (a + detail::kGolden));
    h = detail::mix64(h ^ (b + 0x632BE59BD9B4E019ull));
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : state_(derive_seed(seed, stream)) {}

    std::uint64_t next_u64() {
        state_ += detail::kGolden;
        return detail::mix64(state_);
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + uniform01() * (hi - lo);
    }

    // Standard normal via Box-Muller; u1 is shifted into (0, 1] so the log
    // never sees zero.
    double normal() {
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // +1 or -1 with equal probability.
    double rademacher() {
        return (next_u64() >> 63) ? 1.0 : -1.0;
    }

    // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

} // namespace underiv
