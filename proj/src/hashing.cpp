// SPDX-License-Identifier: Apache-2.0
#include "surveysim/hashing.hpp"

#include <cstdio>

namespace surveysim {

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace surveysim
