// SPDX-License-Identifier: Apache-2.0

#include "tokmerge/innerllm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tokmerge/temporal.hpp"

namespace tokmerge::innerllm {

Ranking rank_by_last_attention(std::span<const float> last_attn, double ratio_percent) {
    if (!(ratio_percent >= 0.0 && ratio_percent < 100.0)) {
        throw ConfigError("inner merge ratio R = " + std::to_string(ratio_percent) + " out of range [0, 100)");
    }
    for (std::size_t i = 0; i < last_attn.size(); ++i) {
        if (!(last_attn[i] >= 0.0f)) {
            throw DataError("last-token attention must be non-negative (index " + std::to_string(i) + ")");
        }
    }
    const auto n = last_attn.size();
    const auto drop = static_cast<std::size_t>(std::floor(ratio_percent * static_cast<double>(n) / 100.0));

    // Order by ascending score; among equal scores the larger index comes first, so it is dropped first.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::ranges::sort(order, [&](std::size_t a, std::size_t b) {
        return last_attn[a] != last_attn[b] ? last_attn[a] < last_attn[b] : a > b;
    });

    Ranking out;
    out.candidates.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(drop));
    out.retained.assign(order.begin() + static_cast<std::ptrdiff_t>(drop), order.end());
    std::ranges::sort(out.candidates);
    std::ranges::sort(out.retained);
    return out;
}

std::vector<std::size_t> similarity_assign(std::span<const std::size_t> candidates,
                                           std::span<const std::size_t> retained, const Matrix& hidden) {
    if (!candidates.empty() && retained.empty()) {
        throw DataError("cannot assign " + std::to_string(candidates.size()) + " candidates to an empty retained set");
    }
    std::vector<std::size_t> sorted_retained(retained.begin(), retained.end());
    std::ranges::sort(sorted_retained);

    std::vector<std::size_t> assignment;
    assignment.reserve(candidates.size());
    for (auto c : candidates) {
        const auto cand = hidden.row(c);
        std::size_t best = sorted_retained.front();
        double best_sim = -INFINITY;
        for (auto r : sorted_retained) {
            const double sim = temporal::cosine_similarity(cand, hidden.row(r));
            if (sim > best_sim) {
                best_sim = sim;
                best = r;
            }
        }
        assignment.push_back(best);
    }
    return assignment;
}

InnerMergeResult merge_assigned(const Matrix& hidden, std::span<const std::size_t> retained,
                                std::span<const std::size_t> candidates, std::span<const std::size_t> assignment) {
    if (assignment.size() != candidates.size()) {
        throw DataError("assignment covers " + std::to_string(assignment.size()) + " of " +
                        std::to_string(candidates.size()) + " candidates");
    }
    const auto dim = hidden.cols;
    InnerMergeResult out;
    out.retained_indices.assign(retained.begin(), retained.end());
    std::ranges::sort(out.retained_indices);
    out.candidates.assign(candidates.begin(), candidates.end());
    out.assignment.assign(assignment.begin(), assignment.end());

    std::vector<std::size_t> slot_of(hidden.rows, hidden.rows);
    for (std::size_t s = 0; s < out.retained_indices.size(); ++s) {
        slot_of[out.retained_indices[s]] = s;
    }
    std::vector<double> sums(out.retained_indices.size() * dim, 0.0);
    std::vector<std::size_t> counts(out.retained_indices.size(), 1);
    for (std::size_t s = 0; s < out.retained_indices.size(); ++s) {
        const auto row = hidden.row(out.retained_indices[s]);
        std::copy(row.begin(), row.end(), sums.begin() + static_cast<std::ptrdiff_t>(s * dim));
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto target = assignment[i];
        if (target >= hidden.rows || slot_of[target] == hidden.rows) {
            throw DataError("candidate " + std::to_string(candidates[i]) + " assigned to non-retained index " +
                            std::to_string(target));
        }
        const auto s = slot_of[target];
        const auto row = hidden.row(candidates[i]);
        for (std::size_t c = 0; c < dim; ++c) {
            sums[s * dim + c] += row[c];
        }
        ++counts[s];
    }

    out.updated = Matrix(out.retained_indices.size(), dim);
    for (std::size_t s = 0; s < out.retained_indices.size(); ++s) {
        auto row = out.updated.row(s);
        if (counts[s] == 1) {
            std::ranges::copy(hidden.row(out.retained_indices[s]), row.begin());
            continue;
        }
        const double n = static_cast<double>(counts[s]);
        for (std::size_t c = 0; c < dim; ++c) {
            row[c] = static_cast<float>(sums[s * dim + c] / n);
        }
    }
    return out;
}

InnerMergeResult inner_merge(const Matrix& hidden, std::span<const float> last_attn, double ratio_percent) {
    if (hidden.rows != last_attn.size()) {
        throw DataError("hidden states have " + std::to_string(hidden.rows) + " rows but the attention row has " +
                        std::to_string(last_attn.size()) + " entries");
    }
    const auto ranking = rank_by_last_attention(last_attn, ratio_percent);
    const auto assignment = similarity_assign(ranking.candidates, ranking.retained, hidden);
    return merge_assigned(hidden, ranking.retained, ranking.candidates, assignment);
}

}  // namespace tokmerge::innerllm
