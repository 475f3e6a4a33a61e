// SPDX-License-Identifier: Apache-2.0

#include "tokmerge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tokmerge/spatial.hpp"

namespace tokmerge::synth {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
    for (auto& s : m_state) {
        s = splitmix64(seed);
    }
}

std::uint64_t Rng::next() {
    const auto result = rotl(m_state[1] * 5, 7) * 9;
    const auto t = m_state[1] << 17;
    m_state[2] ^= m_state[0];
    m_state[3] ^= m_state[1];
    m_state[1] ^= m_state[2];
    m_state[0] ^= m_state[3];
    m_state[2] ^= t;
    m_state[3] = rotl(m_state[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (m_has_spare) {
        m_has_spare = false;
        return m_spare;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    m_spare = radius * std::sin(angle);
    m_has_spare = true;
    return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t bound) {
    // Reject the low values that would bias x % bound.
    const std::uint64_t threshold = (std::uint64_t{0} - bound) % bound;
    while (true) {
        const auto x = next();
        if (x >= threshold) {
            return x % bound;
        }
    }
}

void validate(const SynthSpec& spec) {
    if (spec.frames == 0 || spec.grid.size() == 0 || spec.dim == 0) {
        throw ConfigError("synthetic spec needs B, N_v and d >= 1");
    }
    std::size_t total = 0;
    for (const auto& s : spec.segments) {
        if (s.length == 0) {
            throw ConfigError("synthetic segment length must be >= 1");
        }
        if (!(s.redundant_fraction >= 0.0 && s.redundant_fraction <= 1.0)) {
            throw ConfigError("synthetic redundant_fraction " + std::to_string(s.redundant_fraction) +
                              " out of range [0, 1]");
        }
        total += s.length;
    }
    if (total != spec.frames) {
        throw ConfigError("synthetic segment lengths sum to " + std::to_string(total) + ", expected B = " +
                          std::to_string(spec.frames));
    }
    if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
        throw ConfigError("synthetic noise_sigma must be a finite value >= 0");
    }
}

std::size_t planted_count(const PlantedSegment& segment, std::size_t tokens_per_frame) {
    return static_cast<std::size_t>(std::llround(segment.redundant_fraction * static_cast<double>(tokens_per_frame)));
}

SynthOutput generate(const SynthSpec& spec) {
    validate(spec);
    const auto n = spec.grid.size();
    const auto dim = spec.dim;
    Rng rng(spec.seed);

    std::vector<float> data(spec.frames * n * dim);
    temporal::RedundancyMask truth(spec.frames - 1, n);
    SynthOutput out;
    out.boundaries.push_back(0);

    std::vector<std::uint32_t> slots(n);
    std::vector<float> base(dim);
    std::size_t start = 0;
    for (const auto& seg : spec.segments) {
        const auto end = start + seg.length;
        const auto planted = planted_count(seg, n);

        // Partial Fisher-Yates picks the planted slots.
        for (std::size_t k = 0; k < n; ++k) {
            slots[k] = static_cast<std::uint32_t>(k);
        }
        for (std::size_t i = 0; i < planted; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.below(n - i));
            std::swap(slots[i], slots[j]);
        }
        std::vector<std::uint32_t> chosen(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(planted));
        std::ranges::sort(chosen);
        std::vector<char> is_planted(n, 0);
        for (auto k : chosen) {
            is_planted[k] = 1;
        }

        for (std::size_t k = 0; k < n; ++k) {
            if (is_planted[k]) {
                for (auto& b : base) {
                    b = static_cast<float>(rng.normal());
                }
                for (std::size_t f = start; f < end; ++f) {
                    float* tok = data.data() + (f * n + k) * dim;
                    for (std::size_t c = 0; c < dim; ++c) {
                        const double noise = spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.normal() : 0.0;
                        tok[c] = static_cast<float>(base[c] + noise);
                    }
                    if (f + 1 < end) {
                        truth.set(f, k);
                    }
                }
            } else {
                for (std::size_t f = start; f < end; ++f) {
                    float* tok = data.data() + (f * n + k) * dim;
                    for (std::size_t c = 0; c < dim; ++c) {
                        tok[c] = static_cast<float>(rng.normal());
                    }
                }
            }
        }
        out.expected_gain += static_cast<std::uint64_t>(planted) * (seg.length - 1);
        out.planted_slots.push_back(std::move(chosen));
        out.boundaries.push_back(end);
        start = end;
    }

    out.stream = VideoTokenStream(spec.frames, spec.grid, dim, std::move(data));
    out.ground_truth = std::move(truth);
    return out;
}

std::vector<float> random_attention(std::size_t frames, std::size_t tokens, std::size_t qk_dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> out;
    out.reserve(frames * tokens * tokens);
    Matrix q(tokens, qk_dim);
    Matrix k(tokens, qk_dim);
    for (std::size_t f = 0; f < frames; ++f) {
        for (auto& v : q.data) {
            v = static_cast<float>(rng.normal());
        }
        for (auto& v : k.data) {
            v = static_cast<float>(rng.normal());
        }
        const auto a = spatial::frame_attention(q, k);
        out.insert(out.end(), a.data.begin(), a.data.end());
    }
    return out;
}

}  // namespace tokmerge::synth
