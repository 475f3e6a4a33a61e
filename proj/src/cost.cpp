// SPDX-License-Identifier: Apache-2.0

#include "tokmerge/cost.hpp"

#include <cmath>
#include <fstream>

#include "tokmerge/spatial.hpp"

namespace tokmerge::cost {

namespace {

void check_layers(const ModelProfile& profile, std::span<const std::uint64_t> layer_tokens) {
    if (layer_tokens.size() != profile.layers_T) {
        throw DataError("profile " + profile.name + " has " + std::to_string(profile.layers_T) +
                        " layers but " + std::to_string(layer_tokens.size()) + " token counts were given");
    }
}

}  // namespace

void validate(const ModelProfile& p) {
    if (p.hidden_d == 0 || p.ffn_m == 0 || p.layers_T == 0 || p.tokens_per_frame_Nv == 0 || p.default_frames_B == 0) {
        throw ConfigError("profile '" + p.name + "' needs positive hidden_d, ffn_m, layers_T, tokens_per_frame_Nv, "
                          "default_frames_B");
    }
}

const std::vector<ModelProfile>& builtin_profiles() {
    static const std::vector<ModelProfile> profiles = {
        {"llava-ov-7b", 3584, 18944, 28, 196, 32},
        {"llava-video-7b", 3584, 18944, 28, 169, 64},
        {"llava-ov-72b", 8192, 29568, 80, 196, 32},
    };
    return profiles;
}

nlohmann::json profiles_to_json(std::span<const ModelProfile> profiles) {
    auto out = nlohmann::json::array();
    for (const auto& p : profiles) {
        out.push_back({{"name", p.name},
                       {"hidden_d", p.hidden_d},
                       {"ffn_m", p.ffn_m},
                       {"layers_T", p.layers_T},
                       {"tokens_per_frame_Nv", p.tokens_per_frame_Nv},
                       {"default_frames_B", p.default_frames_B}});
    }
    return {{"profiles", out}};
}

std::vector<ModelProfile> load_profiles(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open profiles " + path.string());
    }
    std::vector<ModelProfile> out;
    try {
        const auto doc = nlohmann::json::parse(in);
        for (const auto& item : doc.at("profiles")) {
            ModelProfile p;
            p.name = item.at("name").get<std::string>();
            p.hidden_d = item.at("hidden_d").get<std::uint64_t>();
            p.ffn_m = item.at("ffn_m").get<std::uint64_t>();
            p.layers_T = item.at("layers_T").get<std::size_t>();
            p.tokens_per_frame_Nv = item.at("tokens_per_frame_Nv").get<std::size_t>();
            p.default_frames_B = item.at("default_frames_B").get<std::size_t>();
            validate(p);
            out.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": malformed profiles document: " + e.what());
    }
    return out;
}

const ModelProfile& find_profile(std::span<const ModelProfile> profiles, const std::string& name) {
    for (const auto& p : profiles) {
        if (p.name == name) {
            return p;
        }
    }
    std::string known;
    for (const auto& p : profiles) {
        known += (known.empty() ? "" : ", ") + p.name;
    }
    throw ConfigError("unknown profile '" + name + "'; known profiles: " + known);
}

double prefill_flops(const ModelProfile& profile, std::span<const std::uint64_t> layer_tokens) {
    check_layers(profile, layer_tokens);
    const double d = static_cast<double>(profile.hidden_d);
    const double m = static_cast<double>(profile.ffn_m);
    double total = 0.0;
    for (auto count : layer_tokens) {
        const double n = static_cast<double>(count);
        total += 4.0 * n * d * d + 2.0 * n * n * d + 2.0 * n * d * m;
    }
    return total;
}

double decode_flops(const ModelProfile& profile, std::span<const std::uint64_t> layer_tokens,
                    std::uint64_t decode_tokens) {
    check_layers(profile, layer_tokens);
    const double d = static_cast<double>(profile.hidden_d);
    const double m = static_cast<double>(profile.ffn_m);
    const double r = static_cast<double>(decode_tokens);
    double total = 0.0;
    for (auto count : layer_tokens) {
        const double n = static_cast<double>(count);
        total += r * ((4.0 * d * d + 2.0 * d * m) + 2.0 * (d * n + 0.5 * d * (r + 1.0)));
    }
    return total;
}

CostReport pipeline_cost_report(const ModelProfile& profile, const CompressionConfig& cfg, std::uint64_t retained,
                                std::optional<std::uint64_t> baseline_tokens) {
    validate(profile);
    if (retained == 0) {
        throw DataError("cost report needs at least one retained token");
    }
    CostReport report;
    report.per_layer_tokens.assign(profile.layers_T, retained);
    if (cfg.inner_enabled) {
        const auto after = static_cast<std::uint64_t>(
            std::floor(static_cast<double>(retained) * (100.0 - cfg.inner_ratio_R) / 100.0));
        for (std::size_t layer = cfg.inner_layer_K; layer < profile.layers_T; ++layer) {
            report.per_layer_tokens[layer] = after;
        }
    }
    report.prefill_flops = prefill_flops(profile, report.per_layer_tokens);
    report.decode_flops = decode_flops(profile, report.per_layer_tokens);
    report.total = report.prefill_flops + report.decode_flops;

    const std::vector<std::uint64_t> base(profile.layers_T, baseline_tokens.value_or(profile.baseline_tokens()));
    report.baseline_prefill = prefill_flops(profile, base);
    report.baseline = report.baseline_prefill + decode_flops(profile, base);
    report.ratio = report.total / report.baseline;
    report.prefill_ratio = report.prefill_flops / report.baseline_prefill;
    return report;
}

std::uint64_t retained_tokens_for_ratio(const ModelProfile& profile, double ratio) {
    if (!(ratio > 0.0 && ratio <= 1.0)) {
        throw ConfigError("retained ratio " + std::to_string(ratio) + " out of range (0, 1]");
    }
    return static_cast<std::uint64_t>(profile.default_frames_B) *
           spatial::retained_target(ratio, profile.tokens_per_frame_Nv);
}

nlohmann::json to_json(const CostReport& report) {
    return {{"per_layer_tokens", report.per_layer_tokens},
            {"prefill_flops", report.prefill_flops},
            {"decode_flops", report.decode_flops},
            {"total", report.total},
            {"baseline_prefill", report.baseline_prefill},
            {"baseline", report.baseline},
            {"ratio", report.ratio},
            {"prefill_ratio", report.prefill_ratio}};
}

}  // namespace tokmerge::cost
