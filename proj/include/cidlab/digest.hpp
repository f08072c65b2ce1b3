#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace cidlab {

// 64-bit FNV-1a. Used for stage caching and manifest input digests; not a
// cryptographic hash.
inline uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 0xCBF29CE484222325ULL) {
  uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string digest_hex(uint64_t h);

// Digest of a file's raw bytes. Throws DataError if unreadable.
uint64_t digest_file(const std::string& path);

}  // namespace cidlab
