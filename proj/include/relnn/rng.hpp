#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace relnn {

// Deterministic random source with named substreams. uniform() converts
// raw engine output directly instead of going through
// std::uniform_real_distribution, whose output is not pinned down by the
// standard; this keeps runs bit-identical across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    // [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n), n > 0, unbiased
    uint64_t uniform_int(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    // Derives an independent seed for a named purpose ("init", "split", ...)
    // so experiments can reproduce each random decision in isolation.
    static uint64_t substream(uint64_t base, std::string_view name) {
        uint64_t h = 1469598103934665603ull;
        for (char c : name) {
            h ^= static_cast<uint8_t>(c);
            h *= 1099511628211ull;
        }
        h += base + 0x9e3779b97f4a7c15ull;
        h ^= h >> 30;
        h *= 0xbf58476d1ce4e5b9ull;
        h ^= h >> 27;
        h *= 0x94d049bb133111ebull;
        h ^= h >> 31;
        return h;
    }

private:
    std::mt19937_64 eng_;
};

} // namespace relnn
