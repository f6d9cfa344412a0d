#pragma once

#include <cstdint>
#include <random>

namespace rankscope {

// Independent named streams derived from one user seed.
enum class Stream : std::uint32_t { Basis = 1, Data = 2, Init = 3, TestData = 4, Padding = 5, Subsample = 6 };

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

}  // namespace rankscope
