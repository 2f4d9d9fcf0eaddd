#pragma once

// Counter-based random numbers. Every draw is a pure function of a
// NoiseStreamKey, so streams can be consumed in any order, from any thread,
// and a path can be extended without disturbing values generated earlier.

#include <array>
#include <cmath>
#include <cstdint>

namespace cnpb {

using Philox4x64Counter = std::array<std::uint64_t, 4>;
using Philox4x64Key = std::array<std::uint64_t, 2>;

namespace detail {

inline void mulhilo64(std::uint64_t a, std::uint64_t b, std::uint64_t& hi,
                      std::uint64_t& lo) {
  const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

}  // namespace detail

/// Philox4x64 with 10 rounds (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3"). Bit-compatible with Random123 and numpy's Philox.
inline Philox4x64Counter philox4x64(Philox4x64Counter ctr, Philox4x64Key key) {
  constexpr std::uint64_t m0 = 0xD2E7470EE14C6C93ULL;
  constexpr std::uint64_t m1 = 0xCA5A826395121157ULL;
  constexpr std::uint64_t w0 = 0x9E3779B97F4A7C15ULL;
  constexpr std::uint64_t w1 = 0xBB67AE8584CAA73BULL;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += w0;
      key[1] += w1;
    }
    std::uint64_t hi0, lo0, hi1, lo1;
    detail::mulhilo64(m0, ctr[0], hi0, lo0);
    detail::mulhilo64(m1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

enum class StreamRole : std::uint8_t { common = 1, intrinsic = 2, initial = 3 };

/// Identifies one block of four random words. Distinct keys give
/// independent blocks; equal keys give identical blocks.
struct NoiseStreamKey {
  std::uint64_t master_seed = 0;
  StreamRole stream_role = StreamRole::common;
  std::uint64_t particle_id = 0;
  std::int64_t block_index = 0;

  friend bool operator==(const NoiseStreamKey&, const NoiseStreamKey&) = default;
};

inline Philox4x64Counter random_block(const NoiseStreamKey& k) {
  constexpr std::uint64_t domain = 0x636e70622d763100ULL;  // "cnpb-v1\0"
  const Philox4x64Key key{k.master_seed,
                          domain | static_cast<std::uint64_t>(k.stream_role)};
  const Philox4x64Counter ctr{static_cast<std::uint64_t>(k.block_index),
                              k.particle_id, 0, 0};
  return philox4x64(ctr, key);
}

/// Uniform on the open interval (0, 1) from the top 52 bits. With 53 bits
/// the largest value would round to 1.
inline double to_unit_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Standard normal quantile for u in (0, 1): Wichura's AS241 (PPND16),
/// relative accuracy about 1e-16. The central branch needs no
/// transcendental calls, which is what makes it cheap here.
inline double normal_quantile(double u) {
  const double q = u - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? u : 1.0 - u;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
             1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
          4.6303378461565452959) * r + 1.42343711074968357734) /
        (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
             0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
          2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
             0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
          5.4637849111641143699) * r + 6.6579046435011037772) /
        (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
             7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
          0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -x : x;
}

/// Four independent standard normals, one per random word (inverse CDF).
inline std::array<double, 4> normal_block(const NoiseStreamKey& k) {
  const auto w = random_block(k);
  return {normal_quantile(to_unit_open(w[0])), normal_quantile(to_unit_open(w[1])),
          normal_quantile(to_unit_open(w[2])), normal_quantile(to_unit_open(w[3]))};
}

/// Standard normal number `index` of the stream (seed, role, id). Index i
/// lives in block floor(i / 4), lane i mod 4, for negative i as well.
inline double stream_normal(std::uint64_t seed, StreamRole role,
                            std::uint64_t id, std::int64_t index) {
  const auto block = normal_block({seed, role, id, index >> 2});
  return block[static_cast<std::size_t>(index & 3)];
}

/// SplitMix64 finalizer; used to derive sub-seeds (one per beta path, etc.).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace cnpb
