#pragma once

#include <cstdint>
#include <random>

namespace c2g {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for an independent stream. Streams derived from the same parent
/// never depend on the order in which they are consumed, so parallel work
/// reproduces serial results.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(derive_seed(seed, stream));
}

// Stream identifiers used across the library.
namespace stream {
inline constexpr std::uint64_t kParameters = 1;
inline constexpr std::uint64_t kCovariates = 2;
inline constexpr std::uint64_t kTreatment = 3;
inline constexpr std::uint64_t kResponse = 4;
inline constexpr std::uint64_t kNoise = 5;
inline constexpr std::uint64_t kLatent = 6;
inline constexpr std::uint64_t kInteractions = 7;
inline constexpr std::uint64_t kPermutations = 20;
inline constexpr std::uint64_t kFolds = 21;
inline constexpr std::uint64_t kFeatures = 22;
inline constexpr std::uint64_t kBootstrap = 23;
inline constexpr std::uint64_t kRestarts = 24;
}  // namespace stream

}  // namespace c2g
