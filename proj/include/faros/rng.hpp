#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace faros {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a root seed and a tuple of
/// counters (round, client id, epoch, purpose tag...). Streams derived from
/// different tuples do not share state, so per-client randomness never
/// depends on the order in which clients are processed.
constexpr std::uint64_t derive_seed(std::uint64_t root,
                                    std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = mix64(root);
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  return Rng{derive_seed(root, path)};
}

/// Purpose tags for derive_seed. Values are part of the reproducibility
/// contract: changing one changes every experiment output.
namespace stream {
inline constexpr std::uint64_t kCenters = 0x01;
inline constexpr std::uint64_t kTrainData = 0x02;
inline constexpr std::uint64_t kTestData = 0x03;
inline constexpr std::uint64_t kPartition = 0x04;
inline constexpr std::uint64_t kInit = 0x05;
inline constexpr std::uint64_t kSampling = 0x06;
inline constexpr std::uint64_t kClientTrain = 0x07;
inline constexpr std::uint64_t kPoison = 0x08;
inline constexpr std::uint64_t kDpNoise = 0x09;
inline constexpr std::uint64_t kEdgeData = 0x0a;
inline constexpr std::uint64_t kShuffle = 0x0b;
}  // namespace stream

}  // namespace faros
