#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace flowconn::rng {

/// Philox4x32-10 counter-based generator.  Stateless: a (counter, key) pair
/// maps to four 32-bit words, so any (path, step, block) coordinate can be
/// evaluated independently, in any order, on any worker.
inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr,
                                          std::array<uint32_t, 2> key) {
  constexpr uint32_t kMul0 = 0xD2511F53u;
  constexpr uint32_t kMul1 = 0xCD9E8D57u;
  constexpr uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const uint64_t p0 = static_cast<uint64_t>(kMul0) * ctr[0];
    const uint64_t p1 = static_cast<uint64_t>(kMul1) * ctr[2];
    ctr = {static_cast<uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
           static_cast<uint32_t>(p1),
           static_cast<uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
           static_cast<uint32_t>(p0)};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

/// Two 32-bit words -> double strictly inside (0, 1).
inline double to_unit(uint32_t hi, uint32_t lo) {
  const uint64_t x = (static_cast<uint64_t>(hi) << 32) | lo;
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

/// One uniform (0,1) variate at coordinate (seed; id0, id1, block).
inline double uniform(uint64_t seed, uint64_t id0, uint32_t id1, uint32_t block) {
  const auto out = philox4x32({static_cast<uint32_t>(id0),
                               static_cast<uint32_t>(id0 >> 32), id1, block},
                              {static_cast<uint32_t>(seed),
                               static_cast<uint32_t>(seed >> 32)});
  return to_unit(out[0], out[1]);
}

/// Box-Muller pair of standard gaussians from one Philox block.
inline std::pair<double, double> gaussian_pair(uint64_t seed, uint64_t id0,
                                               uint32_t id1, uint32_t block) {
  const auto out = philox4x32({static_cast<uint32_t>(id0),
                               static_cast<uint32_t>(id0 >> 32), id1, block},
                              {static_cast<uint32_t>(seed),
                               static_cast<uint32_t>(seed >> 32)});
  const double u1 = to_unit(out[0], out[1]);
  const double u2 = to_unit(out[2], out[3]);
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  return {rad * std::cos(ang), rad * std::sin(ang)};
}

/// Fills out[0..n) with standard gaussians, two per block.
inline void fill_gaussians(uint64_t seed, uint64_t id0, uint32_t id1,
                           double* out, int n) {
  for (int b = 0; 2 * b < n; ++b) {
    const auto [z0, z1] = gaussian_pair(seed, id0, id1, static_cast<uint32_t>(b));
    out[2 * b] = z0;
    if (2 * b + 1 < n) out[2 * b + 1] = z1;
  }
}

}  // namespace flowconn::rng
