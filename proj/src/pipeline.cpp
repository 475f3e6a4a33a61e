// SPDX-License-Identifier: Apache-2.0

#include "tokmerge/pipeline.hpp"

#include <algorithm>
#include <chrono>

namespace tokmerge {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

CompressionReport make_report(std::size_t original, std::size_t after_temporal, std::size_t final_count,
                              const temporal::SegmentPlan& plan, const cost::CostReport& cost) {
    CompressionReport r;
    r.original_count = original;
    r.after_temporal_count = after_temporal;
    r.final_count = final_count;
    r.temporal_prune_ratio = static_cast<double>(original - after_temporal) / static_cast<double>(original);
    r.overall_retained_ratio = static_cast<double>(final_count) / static_cast<double>(original);
    r.per_video_histogram_bin =
        static_cast<double>(histogram_bin(r.temporal_prune_ratio)) / static_cast<double>(kHistogramBins);
    for (std::size_t s = 0; s < plan.gains.size(); ++s) {
        r.segments.push_back({plan.boundaries[s], plan.boundaries[s + 1], plan.gains[s]});
    }
    r.flops.baseline = cost.baseline_prefill;
    r.flops.prefill = cost.prefill_flops;
    r.flops.ratio = cost.prefill_ratio;
    r.flops.decode = cost.decode_flops;
    r.flops.total = cost.total;
    r.flops.baseline_total = cost.baseline;
    r.flops.total_ratio = cost.ratio;
    return r;
}

PipelineResult run_pipeline(const VideoTokenStream& stream, const spatial::ImportanceMap* importance,
                            const CompressionConfig& cfg, const cost::ModelProfile& profile) {
    PipelineResult out;
    auto t0 = std::chrono::steady_clock::now();
    out.mask = temporal::pairwise_redundancy(stream, cfg.tau);
    out.plan = temporal::optimal_segmentation(out.mask);
    const auto tmr = temporal::apply_temporal_merge(stream, out.plan, out.mask, cfg.temporal_merge_mode);
    out.after_temporal_count = tmr.survivor_count();
    out.timings.temporal_ms = elapsed_ms(t0);

    t0 = std::chrono::steady_clock::now();
    out.compressed = spatial::spatial_merge(tmr, importance, cfg);
    out.timings.spatial_ms = elapsed_ms(t0);

    const auto retained = std::max<std::size_t>(out.compressed.size(), 1);
    out.cost = cost::pipeline_cost_report(profile, cfg, retained, stream.token_count());
    out.report = make_report(stream.token_count(), out.after_temporal_count, out.compressed.size(), out.plan, out.cost);
    return out;
}

}  // namespace tokmerge
