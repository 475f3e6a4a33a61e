// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "tokmerge/temporal.hpp"
#include "tokmerge/types.hpp"

namespace tokmerge::synth {

/// xoshiro256** seeded through splitmix64. Standard normals use Box-Muller, consuming two
/// uniforms u1, u2 = (next() >> 11) * 2^-53 and emitting sqrt(-2 ln(1 - u1)) cos(2 pi u2) then
/// the matching sin() sample.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next();
    /// Uniform in [0, 1).
    double uniform();
    double normal();
    /// Uniform integer in [0, bound) by rejection.
    std::uint64_t below(std::uint64_t bound);

private:
    std::array<std::uint64_t, 4> m_state{};
    bool m_has_spare = false;
    double m_spare = 0.0;
};

struct PlantedSegment {
    std::size_t length = 0;
    double redundant_fraction = 0.0;
};

struct SynthSpec {
    std::size_t frames = 0;
    Grid grid;
    std::size_t dim = 0;
    std::vector<PlantedSegment> segments;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

/// Throws ConfigError if lengths do not sum to `frames` or a fraction is outside [0, 1].
void validate(const SynthSpec& spec);

/// Planted slots per segment: round(fraction * N_v).
std::size_t planted_count(const PlantedSegment& segment, std::size_t tokens_per_frame);

struct SynthOutput {
    VideoTokenStream stream;
    temporal::RedundancyMask ground_truth;
    /// Planted spatial slots of each segment, ascending.
    std::vector<std::vector<std::uint32_t>> planted_slots;
    /// 0 = b0 < ... < bK = B
    std::vector<std::size_t> boundaries;
    /// Sum over segments of planted_count * (length - 1).
    std::uint64_t expected_gain = 0;
};

/// Each segment repeats a base vector (plus N(0, sigma^2) noise per occurrence) in its planted
/// slots; every other token is i.i.d. N(0, 1). Deterministic in `seed`.
SynthOutput generate(const SynthSpec& spec);

/// Per-frame attention matrices (B, N, N) from random q/k projections of width `qk_dim`.
std::vector<float> random_attention(std::size_t frames, std::size_t tokens, std::size_t qk_dim, std::uint64_t seed);

}  // namespace tokmerge::synth
