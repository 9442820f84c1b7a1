#pragma once

#include <cstdint>
#include <random>

namespace ics {

using Rng = std::mt19937_64;

/// Stream tags keep the generators of different subsystems disjoint.
enum class Stream : std::uint32_t {
  Specimen = 1,
  Chain = 2,
  Replicate = 3,
  Power = 4,
  Design = 5,
};

/// Generator for member `index` of `stream` under a run seed. Every
/// (seed, stream, index) triple yields an independent, schedule-free
/// sequence, so work split across threads stays reproducible.
inline Rng make_substream(std::uint64_t seed, Stream stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

}  // namespace ics
