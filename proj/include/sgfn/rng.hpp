#pragma once

#include <cstdint>
#include <random>

namespace sgfn {

using Rng = std::mt19937_64;

// Independent stream derived from a root seed. Distinct stream ids give
// statistically unrelated generators, so adding a consumer never perturbs
// the others.
inline Rng make_stream(std::uint64_t root_seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(root_seed), static_cast<std::uint32_t>(root_seed >> 32),
                      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                      0x5367666eu};
    return Rng(seq);
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline int uniform_int(Rng& rng, int n) {
    return std::uniform_int_distribution<int>(0, n - 1)(rng);
}

}  // namespace sgfn
