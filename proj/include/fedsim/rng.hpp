#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedsim {

using Rng = std::mt19937_64;

// Stable 64-bit mixer (splitmix64 finalizer).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a master seed and a tuple of
// integer keys. The result only depends on the values, never on call
// order, which is what makes per-(client, round) streams scheduling-free.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = mix64(master);
  for (auto k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  return Rng{derive_seed(master, keys)};
}

// Purpose tags so that different consumers of one master seed never share
// a stream.
namespace stream {
inline constexpr std::uint64_t kData = 0xD0;
inline constexpr std::uint64_t kSplit = 0xD1;
inline constexpr std::uint64_t kPartition = 0xD2;
inline constexpr std::uint64_t kInit = 0xD3;
inline constexpr std::uint64_t kSelect = 0xD4;
inline constexpr std::uint64_t kTrain = 0xD5;
}  // namespace stream

// Uniform double in the open interval (0, 1).
inline double uniform_open01(Rng& rng) {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace fedsim
