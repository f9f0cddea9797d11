// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_HASH_HPP
#define BEAMCAST_HASH_HPP

#include <cstddef>
#include <cstdint>
#include <string>

namespace beamcast {

// FNV-1a, 64-bit. Used for codebook hashes and file checksums.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }

  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(const void* data, std::size_t n) {
  Fnv1a h;
  h.update(data, n);
  return h.digest();
}

std::string hex_digest(std::uint64_t h);

}  // namespace beamcast

#endif  // BEAMCAST_HASH_HPP
