// SPDX-License-Identifier: Apache-2.0
//
// Draws with identical output on every standard library. The std::
// distributions are implementation-defined, so seeded runs would differ
// between toolchains.
#pragma once

#include <cmath>
#include <numbers>
#include <random>

namespace surveysim {

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Box-Muller; consumes two engine outputs per call.
inline double standard_normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace surveysim
