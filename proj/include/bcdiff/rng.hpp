#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "bcdiff/matrix.hpp"

namespace bcdiff {

// Stateless seed mixing (splitmix64 finalizer). Every stochastic site derives
// a child seed from (run seed, purpose tag, indices) and opens a fresh stream,
// so the draw a given sample sees never depends on thread count or batch
// iteration order.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t s = mix64(root);
    s = mix64(s ^ a);
    s = mix64(s ^ b);
    s = mix64(s ^ c);
    return s;
}

// Seed tags, one per stochastic purpose.
enum : std::uint64_t {
    kSeedEmbedding = 0x01,
    kSeedNetInit = 0x02,
    kSeedTrainDraw = 0x03,
    kSeedSampler = 0x04,
    kSeedData = 0x05,
    kSeedEval = 0x06,
};

// Deterministic stream: mt19937_64 engine with explicit uniform/normal
// mappings. The standard specifies the engine output exactly; the standard
// distributions are implementation-defined, so the Box-Muller transform is
// done by hand to keep results stable across toolchains.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer on [0, n).
    std::uint64_t uniform_below(std::uint64_t n) {
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller; the second value of each pair is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    // Fills row-major, matching the documented draw order for reproducibility.
    void fill_normal(Matrix& m) {
        for (double& x : m.data) x = normal();
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline Matrix random_normal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    RngStream rng(seed);
    rng.fill_normal(m);
    return m;
}

}  // namespace bcdiff
