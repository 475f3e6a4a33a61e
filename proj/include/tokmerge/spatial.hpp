// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tokmerge/config.hpp"
#include "tokmerge/temporal.hpp"
#include "tokmerge/types.hpp"

namespace tokmerge::spatial {

/// Row-wise softmax(q k^T / sqrt(d)) for one frame; q and k are N x d.
Matrix frame_attention(const Matrix& q, const Matrix& k);

/// Mean attention each token receives: column means of a square attention matrix.
std::vector<float> importance_scores(const Matrix& attention);

/// Adaptive average pooling of an H x W score grid down to `pooled`.
Matrix pool_importance(const Matrix& raw, Grid pooled);

/// Indices of the `keep` largest scores (ties toward smaller index), returned ascending.
std::vector<std::size_t> attention_select(std::span<const float> scores, std::size_t keep);

/// Per-frame token importance on the encoder grid and pooled to the token grid.
struct ImportanceMap {
    std::size_t frames = 0;
    Grid raw_grid;
    Grid pooled_grid;
    /// frames x raw_grid.size()
    Matrix raw;
    /// frames x pooled_grid.size()
    Matrix pooled;

    std::span<const float> pooled_frame(std::size_t f) const { return pooled.row(f); }
};

/// From a stack of per-frame attention matrices, flattened (B, N_a, N_a).
ImportanceMap importance_from_attention(std::span<const float> attention, std::size_t frames, Grid raw_grid,
                                        Grid pooled_grid);
/// From per-frame query/key projections, flattened (B, N_a, d).
ImportanceMap importance_from_qk(std::span<const float> q, std::span<const float> k, std::size_t frames,
                                 std::size_t dim, Grid raw_grid, Grid pooled_grid);

struct ClusterState {
    std::vector<double> rho;
    std::vector<double> delta;
    std::vector<double> gamma;
    std::size_t k_used = 0;
    /// Center token indices, ascending.
    std::vector<std::size_t> centers;
    /// assignment[i] = position in `centers` of the cluster token i belongs to (centers map to themselves).
    std::vector<std::size_t> assignment;
};

/// max(2, floor(sqrt(n))) clamped to n - 1.
std::size_t auto_knn_k(std::size_t n);

/// Density-peak clustering with kNN local density (Euclidean distances).
/// Requires 1 <= k < N (or N = 1) and c >= 1; c is clamped to N.
ClusterState dpc_knn_cluster(const Matrix& tokens, std::size_t k, std::size_t c);

struct ClusterRepresentatives {
    /// One row per center, in the order of ClusterState::centers.
    Matrix values;
    std::vector<std::size_t> centers;
    /// Non-center members of each cluster, ascending.
    std::vector<std::vector<std::size_t>> members;
};

/// Each representative is the mean of its center and every token assigned to it.
ClusterRepresentatives merge_clusters(const Matrix& tokens, const ClusterState& state);

/// ceil(keep_total * group / survivors) without floating error.
std::size_t group_budget(std::size_t group_size, std::size_t target, std::size_t survivors);

/// ceil(target_ratio * count).
std::size_t retained_target(double target_ratio, std::size_t count);

/// Attention-selects each frame's non-redundant tokens and cluster-merges each segment's
/// redundant first-frame tokens under one uniform keep rate; output ascending by (frame, index).
/// `importance` may be null only when the temporal survivors already fit the budget.
CompressedVideo spatial_merge(const temporal::TemporalMergeResult& tmr, const ImportanceMap* importance,
                              const CompressionConfig& cfg);
inline CompressedVideo spatial_merge(const temporal::TemporalMergeResult& tmr, const ImportanceMap& importance,
                                     const CompressionConfig& cfg) {
    return spatial_merge(tmr, &importance, cfg);
}

/// Temporal-stage survivors as a CompressedVideo (the pass-through branch of spatial_merge).
CompressedVideo temporal_survivors(const temporal::TemporalMergeResult& tmr);

}  // namespace tokmerge::spatial
