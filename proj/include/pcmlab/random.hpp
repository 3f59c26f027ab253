#pragma once

#include <cstdint>
#include <random>

namespace pcm {

using Rng = std::mt19937_64;

/// One round of the SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based stream derivation. Every random draw in the library is
/// taken from a stream keyed by (master seed, point index, sample index):
///
///   seed = mix(mix(mix(master) ^ point) ^ sample)
///
/// with mix = splitmix64 and distinct odd offsets folded into each stage,
/// so the stream for a sample never depends on how work was scheduled.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t point,
                          std::uint64_t sample);

Rng make_stream(std::uint64_t master, std::uint64_t point, std::uint64_t sample);

}  // namespace pcm
