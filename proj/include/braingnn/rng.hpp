#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace braingnn {

/// Derives an independent seed from a root seed, a purpose label, and an
/// index, so components (init, shuffling, sampling, embedding) own disjoint,
/// reproducible streams regardless of evaluation order.
std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose, std::uint64_t index = 0);

inline std::mt19937_64 make_rng(std::uint64_t root, std::string_view purpose,
                                std::uint64_t index = 0) {
    return std::mt19937_64(derive_seed(root, purpose, index));
}

}  // namespace braingnn
