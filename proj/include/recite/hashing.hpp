#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace recite {

/// Lowercase hex SHA-256 of the given bytes. Used for prompt hashes, cache
/// keys and configuration fingerprints, so it must not vary across platforms.
std::string sha256_hex(std::string_view bytes);

/// SplitMix64 finalizer; derives independent sub-seeds from a base seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
    return mix_seed(mix_seed(a) ^ (b + 0x632be59bd9b4e019ULL));
}

}  // namespace recite
