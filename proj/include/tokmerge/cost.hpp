// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tokmerge/config.hpp"

namespace tokmerge::cost {

/// Decoder dimensions plus the default video input shape.
struct ModelProfile {
    std::string name;
    std::uint64_t hidden_d = 0;
    std::uint64_t ffn_m = 0;
    std::size_t layers_T = 0;
    std::size_t tokens_per_frame_Nv = 0;
    std::size_t default_frames_B = 0;

    std::uint64_t baseline_tokens() const { return static_cast<std::uint64_t>(default_frames_B) * tokens_per_frame_Nv; }
    bool operator==(const ModelProfile&) const = default;
};

/// Throws ConfigError if any count is zero.
void validate(const ModelProfile& profile);

/// llava-ov-7b, llava-video-7b, llava-ov-72b.
const std::vector<ModelProfile>& builtin_profiles();
std::vector<ModelProfile> load_profiles(const std::filesystem::path& path);
nlohmann::json profiles_to_json(std::span<const ModelProfile> profiles);
/// Throws ConfigError listing the known names when `name` is absent.
const ModelProfile& find_profile(std::span<const ModelProfile> profiles, const std::string& name);

inline constexpr std::uint64_t kDecodeTokens = 100;

/// Sum over layers of 4 n d^2 + 2 n^2 d + 2 n d m.
double prefill_flops(const ModelProfile& profile, std::span<const std::uint64_t> layer_tokens);
/// Sum over layers of R ((4 d^2 + 2 d m) + 2 (d n + d (R + 1) / 2)).
double decode_flops(const ModelProfile& profile, std::span<const std::uint64_t> layer_tokens,
                    std::uint64_t decode_tokens = kDecodeTokens);

struct CostReport {
    std::vector<std::uint64_t> per_layer_tokens;
    double prefill_flops = 0.0;
    double decode_flops = 0.0;
    double total = 0.0;
    double baseline_prefill = 0.0;
    /// Prefill + decode with every layer at the baseline token count.
    double baseline = 0.0;
    /// total / baseline
    double ratio = 0.0;
    /// prefill_flops / baseline_prefill
    double prefill_ratio = 0.0;
};

/// Per-layer counts: `retained` up to layer K, floor(retained (1 - R/100)) after it when inner
/// merging is enabled. Baseline counts default to the profile's B * N_v.
CostReport pipeline_cost_report(const ModelProfile& profile, const CompressionConfig& cfg, std::uint64_t retained,
                                std::optional<std::uint64_t> baseline_tokens = std::nullopt);

/// Vision tokens entering the LLM at a before-LLM retained ratio: B * ceil(ratio * N_v).
std::uint64_t retained_tokens_for_ratio(const ModelProfile& profile, double ratio);

nlohmann::json to_json(const CostReport& report);

}  // namespace tokmerge::cost
