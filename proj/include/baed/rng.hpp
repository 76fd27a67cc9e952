#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace baed::rng {

// Stage streams so that sub-seeds derived from one run seed never collide.
enum class Stream : uint64_t {
    graph = 0x67726170,
    split = 0x73706c74,
    prior = 0x7072696f,
    train = 0x7472616e,
    walk = 0x77616c6b,
};

// splitmix64 finalizer over (seed, stream)
uint64_t mix(uint64_t seed, uint64_t stream);
inline uint64_t mix(uint64_t seed, Stream stream) { return mix(seed, static_cast<uint64_t>(stream)); }

// mt19937_64 with fixed-layout transforms. The standard pins the engine's
// output sequence but not the distributions', so the double/normal/int
// transforms are written out here to keep results identical across
// standard library versions.
class Engine {
public:
    explicit Engine(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // [0, 1), 53-bit resolution
    double next_double() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller (two u64 per draw)
    double next_normal();

    // [0, bound), rejection sampled
    int next_int(int bound);

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(next_int(i + 1))]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace baed::rng
