#pragma once
#include <cstdint>
#include <string>
#include <string_view>

namespace ulwb {

// FNV-1a 64-bit. Used for content fingerprints in manifests and for seed
// stream derivation; not a cryptographic hash.
constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr uint64_t kFnvPrime = 0x100000001b3ull;

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = kFnvOffset) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = kFnvOffset) noexcept {
    return fnv1a64(s.data(), s.size(), h);
}

std::string hash_hex(uint64_t h);

/// Fingerprint of a file's contents. Throws std::runtime_error if unreadable.
uint64_t hash_file(const std::string& path);

} // namespace ulwb
