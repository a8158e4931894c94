#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace alm {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/**
 * Derives an independent stream seed from a base seed and a path of stream
 * identifiers, e.g. derive_seed(seed, {cell_id, replica, kSampleStream}).
 * Each identifier is folded in with a SplitMix64 step, so distinct paths give
 * unrelated seeds and the result never depends on evaluation order.
 */
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) noexcept;

/// Named stream tags used across the library.
namespace stream {
inline constexpr std::uint64_t kSample = 0x53414d50ULL;     // "SAMP"
inline constexpr std::uint64_t kPerturb = 0x50455254ULL;    // "PERT"
inline constexpr std::uint64_t kMoments = 0x4d4f4d54ULL;    // "MOMT"
inline constexpr std::uint64_t kTrueModel = 0x54525545ULL;  // "TRUE"
}  // namespace stream

/// The engine behind every stochastic routine: a 64-bit Mersenne Twister
/// seeded with a single derived 64-bit value.
using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) { return Engine(mix64(seed)); }

}  // namespace alm
