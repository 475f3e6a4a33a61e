// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tokmerge/config.hpp"
#include "tokmerge/types.hpp"

namespace tokmerge::temporal {

/// Cosine similarity accumulated in double. Zero-norm inputs give 0; the result is clamped to [-1, 1].
double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// (B-1) x N_v bit matrix; bit (m, k) is set iff token k persists from frame m to frame m+1.
class RedundancyMask {
public:
    RedundancyMask() = default;
    RedundancyMask(std::size_t rows, std::size_t cols);

    std::size_t rows() const { return m_rows; }
    std::size_t cols() const { return m_cols; }
    /// Number of frames the mask was computed over (rows + 1).
    std::size_t frames() const { return m_rows + 1; }
    std::size_t words_per_row() const { return m_words; }

    bool test(std::size_t m, std::size_t k) const { return (m_bits[m * m_words + k / 64] >> (k % 64)) & 1u; }
    void set(std::size_t m, std::size_t k, bool value = true);

    std::span<const std::uint64_t> row_words(std::size_t m) const { return {m_bits.data() + m * m_words, m_words}; }

    bool operator==(const RedundancyMask&) const = default;

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::size_t m_words = 0;
    std::vector<std::uint64_t> m_bits;
};

/// Compares every token with the same spatial slot in the next frame.
RedundancyMask pairwise_redundancy(const VideoTokenStream& stream, double tau);

/// Frame spans are 0-based and half-open: [start, end) with 0 <= start < end <= B.
/// Number of slots redundant across every consecutive pair inside [start, end).
std::size_t persistent_token_count(const RedundancyMask& mask, std::size_t start, std::size_t end);

/// Prunable tokens of one segment: persistent_token_count * (end - start - 1).
std::uint64_t segment_gain(const RedundancyMask& mask, std::size_t start, std::size_t end);

/// Globally optimal segmentation of [0, B).
struct SegmentPlan {
    /// 0 = boundaries.front() < ... < boundaries.back() = B.
    std::vector<std::size_t> boundaries;
    /// dp[i]: best total gain over frames [0, i); size B+1.
    std::vector<std::uint64_t> dp;
    /// prev[i]: start of the last segment in the optimum for dp[i]; prev[0] = 0.
    std::vector<std::size_t> prev;
    std::vector<std::uint64_t> gains;
    std::uint64_t total_gain = 0;

    std::size_t segment_count() const { return gains.size(); }
};

/// O(B^2) dynamic program over segment ends; argmax ties resolve to the smallest start.
SegmentPlan optimal_segmentation(const RedundancyMask& mask);

struct SegmentMerge {
    std::size_t start = 0;
    std::size_t end = 0;
    /// Spatial slots merged into frame `start`, ascending.
    std::vector<std::uint32_t> redundant;
    /// Merged first-frame values, one row per redundant slot.
    Matrix merged;
};

/// Non-redundant tokens kept on one frame.
struct FrameSurvivors {
    std::vector<std::uint32_t> indices;
    Matrix values;
};

struct TemporalMergeResult {
    std::size_t frames = 0;
    Grid grid;
    std::size_t dim = 0;
    std::vector<SegmentMerge> segments;
    /// One entry per frame.
    std::vector<FrameSurvivors> non_redundant;
    std::size_t original_count = 0;
    std::size_t pruned_count = 0;

    std::size_t survivor_count() const { return original_count - pruned_count; }
};

/// Removes the repeated occurrences of every persistent slot in each segment, keeping
/// (mode=first) or averaging into (mode=mean) its first occurrence.
TemporalMergeResult apply_temporal_merge(const VideoTokenStream& stream, const SegmentPlan& plan,
                                         const RedundancyMask& mask, TemporalMergeMode mode);

}  // namespace tokmerge::temporal
