#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace demsr {

// splitmix64 finalizer. Full-avalanche mix of one 64-bit word.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based stream: draw i is a pure function of (seed, i), so sequences
// are identical on every platform and independent of call interleaving.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() { return mix64(seed_ ^ mix64(counter_++)); }

    // [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Symmetric uniform in [-amp, +amp].
    double next_symmetric(double amp) { return (2.0 * next_double() - 1.0) * amp; }

    // Standard normal via Box-Muller; avoids std::normal_distribution so the
    // stream does not depend on the standard library implementation.
    double next_normal() {
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; // (0, 1]
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_u64() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t counter_ = 0;
};

// Keyed draw for lattice algorithms: value depends only on (seed, key words),
// never on evaluation order.
inline std::uint64_t keyed_u64(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                               std::uint64_t c, std::uint64_t d) {
    std::uint64_t h = mix64(seed ^ 0x6b79656452616e64ULL);
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    h = mix64(h ^ d);
    return h;
}

inline double keyed_symmetric(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                              std::uint64_t c, std::uint64_t d, double amp) {
    const double u = static_cast<double>(keyed_u64(seed, a, b, c, d) >> 11) * 0x1.0p-53;
    return (2.0 * u - 1.0) * amp;
}

} // namespace demsr
