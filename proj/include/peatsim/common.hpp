#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace peatsim {

using Bytes = double;
using Seconds = double;
using Hertz = double;
using Watts = double;

inline constexpr double kGigabyte = 1e9;

/// Single engine type used everywhere; every stochastic draw flows through one.
using Rng = std::mt19937_64;

/// Derives an independent engine from a base seed and a stream label so that
/// adding draws to one subsystem never perturbs another.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

namespace streams {
inline constexpr std::uint64_t kWorld = 1;
inline constexpr std::uint64_t kMobility = 2;
inline constexpr std::uint64_t kFading = 3;
inline constexpr std::uint64_t kTuning = 4;
inline constexpr std::uint64_t kInit = 5;
inline constexpr std::uint64_t kPolicy = 6;
inline constexpr std::uint64_t kShuffle = 7;
inline constexpr std::uint64_t kTrainEpisode = 8;
inline constexpr std::uint64_t kEvalEpisode = 9;
inline constexpr std::uint64_t kEvalPolicy = 10;
}  // namespace streams

struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct InfeasibleRateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AllocationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct AggregationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DecodeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace peatsim
