/*
 * pilotkit
 * Copyright (c) The pilotkit Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */

#ifndef PILOTKIT_HASH_HPP
#define PILOTKIT_HASH_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace pilotkit {

// 64-bit FNV-1a. Used for content checksums, shuffle partitioning and seed
// derivation; must stay stable across platforms and builds.
class Fnv1a64 {
 public:
  static constexpr uint64_t kOffset = 14695981039346656037ull;
  static constexpr uint64_t kPrime = 1099511628211ull;

  constexpr Fnv1a64() = default;

  constexpr void update(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      state_ ^= static_cast<uint64_t>(p[i]);
      state_ *= kPrime;
    }
  }

  constexpr void update(std::string_view s) { update(s.data(), s.size()); }

  constexpr uint64_t digest() const { return state_; }

 private:
  uint64_t state_ = kOffset;
};

inline uint64_t fnv1a64(std::string_view s) {
  Fnv1a64 h;
  h.update(s);
  return h.digest();
}

inline uint64_t fnv1a64(const void* data, size_t n) {
  Fnv1a64 h;
  h.update(data, n);
  return h.digest();
}

std::string to_hex(uint64_t v);

}  // namespace pilotkit

#endif  // PILOTKIT_HASH_HPP
