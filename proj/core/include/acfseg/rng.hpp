#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace acfseg {

// Named split of a master seed, so each subsystem (init, augmentation,
// sampling, data generation) gets an independent, reproducible stream.
inline std::mt19937_64 split_rng(uint64_t seed, std::string_view subsystem) {
    uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (char ch : subsystem) {
        h ^= static_cast<uint64_t>(static_cast<unsigned char>(ch));
        h *= 1099511628211ull;
    }
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                      static_cast<uint32_t>(h), static_cast<uint32_t>(h >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace acfseg
