// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace surveysim {

// 64-bit FNV-1a. Stable across platforms; used for prompt keys and artifact hashes.
constexpr std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value);

inline std::string hash_hex(std::string_view data) { return hex64(fnv1a64(data)); }

}  // namespace surveysim
