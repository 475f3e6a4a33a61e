// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "json.hpp"
#include "tokmerge/types.hpp"

namespace tokmerge {

enum class TemporalMergeMode {
    mean,  ///< merged first-frame token becomes the mean of all its occurrences
    first  ///< merged first-frame token keeps its original value
};

const char* to_string(TemporalMergeMode mode);

struct CompressionConfig {
    double tau = 0.8;
    double target_ratio = 0.25;
    TemporalMergeMode temporal_merge_mode = TemporalMergeMode::mean;
    /// Token grid the importance map is pooled to; unset means "the stream's grid".
    std::optional<Grid> pooled_grid;
    /// DPC-KNN neighbour count; unset means max(2, floor(sqrt(N))) clamped to N-1.
    std::optional<std::size_t> knn_k;
    bool inner_enabled = true;
    std::size_t inner_layer_K = 18;
    double inner_ratio_R = 50.0;

    bool operator==(const CompressionConfig&) const = default;
};

/// Builds a config from a JSON object, filling defaults for missing fields.
/// Throws ConfigError naming the offending field and its bounds.
CompressionConfig validate_config(const nlohmann::json& raw);
CompressionConfig load_config(const std::string& path);

nlohmann::json to_json(const CompressionConfig& cfg);

}  // namespace tokmerge
