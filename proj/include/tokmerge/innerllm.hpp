// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tokmerge/types.hpp"

namespace tokmerge::innerllm {

struct Ranking {
    std::vector<std::size_t> retained;
    std::vector<std::size_t> candidates;
};

/// floor(R * N / 100) lowest-scored indices become merge candidates; on equal scores the
/// smaller index is retained. Both lists ascending. Throws ConfigError unless 0 <= R < 100.
Ranking rank_by_last_attention(std::span<const float> last_attn, double ratio_percent);

/// Maps each candidate to the retained index of highest hidden-state cosine similarity
/// (ties toward the smaller retained index). Result is parallel to `candidates`.
std::vector<std::size_t> similarity_assign(std::span<const std::size_t> candidates,
                                           std::span<const std::size_t> retained, const Matrix& hidden);

struct InnerMergeResult {
    std::vector<std::size_t> retained_indices;
    /// retained_indices.size() x d
    Matrix updated;
    /// Parallel to `candidates`: the retained index each candidate merged into.
    std::vector<std::size_t> candidates;
    std::vector<std::size_t> assignment;
};

/// Each retained row becomes the unweighted mean of itself and its assigned candidates.
InnerMergeResult merge_assigned(const Matrix& hidden, std::span<const std::size_t> retained,
                                std::span<const std::size_t> candidates, std::span<const std::size_t> assignment);

/// rank -> assign -> merge on one layer's dumped vision-token states.
InnerMergeResult inner_merge(const Matrix& hidden, std::span<const float> last_attn, double ratio_percent);

}  // namespace tokmerge::innerllm
