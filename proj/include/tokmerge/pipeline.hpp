// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include "tokmerge/config.hpp"
#include "tokmerge/cost.hpp"
#include "tokmerge/innerllm.hpp"
#include "tokmerge/spatial.hpp"
#include "tokmerge/temporal.hpp"
#include "tokmerge/types.hpp"

namespace tokmerge {

struct StageTimings {
    double temporal_ms = 0.0;
    double spatial_ms = 0.0;
    double inner_ms = 0.0;
};

struct PipelineResult {
    temporal::RedundancyMask mask;
    temporal::SegmentPlan plan;
    std::size_t after_temporal_count = 0;
    CompressedVideo compressed;
    CompressionReport report;
    cost::CostReport cost;
    StageTimings timings;
};

/// Temporal merge followed by spatial merge, plus the cost report for the surviving tokens.
/// `importance` may be null when no spatial reduction is needed.
PipelineResult run_pipeline(const VideoTokenStream& stream, const spatial::ImportanceMap* importance,
                            const CompressionConfig& cfg, const cost::ModelProfile& profile);

/// Fills the report fields derived from counts, segments and cost.
CompressionReport make_report(std::size_t original, std::size_t after_temporal, std::size_t final_count,
                              const temporal::SegmentPlan& plan, const cost::CostReport& cost);

}  // namespace tokmerge
