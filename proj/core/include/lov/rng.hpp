#pragma once

#include <array>
#include <cstdint>

namespace lov {

/// Counter-based random number generation (Philox4x32-10).
///
/// Every draw is a pure function of (seed, path, step, slot), so simulation
/// results do not depend on scheduling or loop order.
namespace rng {

/// One Philox4x32-10 block: four 32-bit words from a 64-bit key and a
/// 128-bit counter.
std::array<std::uint32_t, 4> philox4x32(std::uint64_t key,
                                        const std::array<std::uint32_t, 4>& counter);

/// Uniform draw in the open interval (0,1) with 53 bits of precision.
double uniform01(std::uint64_t seed, std::uint64_t path, std::uint32_t step,
                 std::uint32_t slot = 0);

/// Standard normal draw via the inverse CDF (Wichura's AS241 PPND16).
double normal(std::uint64_t seed, std::uint64_t path, std::uint32_t step,
              std::uint32_t slot = 0);

/// Inverse standard normal CDF, accurate to ~1e-15 on (0,1).
double inverse_normal_cdf(double p);

}  // namespace rng
}  // namespace lov
