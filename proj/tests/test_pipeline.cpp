// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "tokmerge/pipeline.hpp"
#include "tokmerge/synth.hpp"

using namespace tokmerge;

TEST_SUITE("pipeline") {
    TEST_CASE("report counts and ratios are consistent with the output") {
        const synth::SynthSpec spec{8, {4, 4}, 32, {{3, 0.5}, {5, 0.75}}, 0.0, 6};
        const auto gen = synth::generate(spec);
        const auto attn = synth::random_attention(8, 16, 8, 2);
        const auto imp = spatial::importance_from_attention(attn, 8, {4, 4}, {4, 4});
        const auto& profile = cost::find_profile(cost::builtin_profiles(), "llava-ov-7b");
        for (double ratio : {1.0, 0.5, 0.25, 0.1}) {
            CompressionConfig cfg;
            cfg.target_ratio = ratio;
            const auto r = run_pipeline(gen.stream, &imp, cfg, profile);
            const auto& rep = r.report;
            CHECK(rep.original_count == 128);
            CHECK(rep.final_count <= rep.after_temporal_count);
            CHECK(rep.after_temporal_count <= rep.original_count);
            CHECK(rep.final_count == r.compressed.size());
            CHECK(rep.original_count - rep.after_temporal_count == r.plan.total_gain);
            CHECK(r.plan.total_gain == gen.expected_gain);
            CHECK(rep.temporal_prune_ratio == doctest::Approx(static_cast<double>(gen.expected_gain) / 128.0));
            CHECK(rep.overall_retained_ratio == static_cast<double>(rep.final_count) / 128.0);
            CHECK(rep.segments.size() == 2);
            CHECK(rep.flops.ratio == doctest::Approx(rep.flops.prefill / rep.flops.baseline));
            CHECK(rep.flops.total_ratio == doctest::Approx(rep.flops.total / rep.flops.baseline_total));
            CHECK(rep.flops.ratio <= 1.0);
            CHECK(rep.per_video_histogram_bin ==
                  static_cast<double>(histogram_bin(rep.temporal_prune_ratio)) / kHistogramBins);
        }
    }

    TEST_CASE("importance may be omitted when the temporal stage already meets the budget") {
        const synth::SynthSpec spec{4, {3, 3}, 32, {{4, 1.0}}, 0.0, 1};
        const auto gen = synth::generate(spec);
        CompressionConfig cfg;
        cfg.target_ratio = 0.25;
        const auto r = run_pipeline(gen.stream, nullptr, cfg, cost::builtin_profiles().front());
        CHECK(r.compressed.size() == 9);
        CHECK(r.compressed.provenance[0].kind == TokenKind::temporal_rep);
        CHECK(r.compressed.provenance[0].members.size() == 3);
    }
}
