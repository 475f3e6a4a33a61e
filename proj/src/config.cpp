// SPDX-License-Identifier: Apache-2.0

#include "tokmerge/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace tokmerge {

namespace {

const std::set<std::string> kKnownFields = {"tau",         "target_ratio",  "temporal_merge_mode",
                                            "pooled_grid", "knn_k",         "inner_enabled",
                                            "inner_layer_K", "inner_ratio_R"};

double real_field(const nlohmann::json& raw, const char* name, double fallback) {
    if (!raw.contains(name)) {
        return fallback;
    }
    const auto& v = raw.at(name);
    if (!v.is_number()) {
        throw ConfigError(std::string("config field '") + name + "' must be a number");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        throw ConfigError(std::string("config field '") + name + "' must be finite");
    }
    return x;
}

std::size_t count_field(const nlohmann::json& v, const char* name, std::size_t min_value) {
    if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min_value)) {
        throw ConfigError(std::string("config field '") + name + "' must be an integer >= " +
                          std::to_string(min_value));
    }
    return static_cast<std::size_t>(v.get<long long>());
}

}  // namespace

const char* to_string(TemporalMergeMode mode) {
    return mode == TemporalMergeMode::mean ? "mean" : "first";
}

CompressionConfig validate_config(const nlohmann::json& raw) {
    CompressionConfig cfg;
    if (raw.is_null()) {
        return cfg;
    }
    if (!raw.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    for (const auto& [key, _] : raw.items()) {
        if (!kKnownFields.contains(key)) {
            throw ConfigError("unknown config field '" + key + "'");
        }
    }

    cfg.tau = real_field(raw, "tau", cfg.tau);
    if (cfg.tau < 0.0 || cfg.tau > 1.0) {
        throw ConfigError("config field 'tau' = " + std::to_string(cfg.tau) + " out of range [0, 1]");
    }
    cfg.target_ratio = real_field(raw, "target_ratio", cfg.target_ratio);
    if (cfg.target_ratio <= 0.0 || cfg.target_ratio > 1.0) {
        throw ConfigError("config field 'target_ratio' = " + std::to_string(cfg.target_ratio) +
                          " out of range (0, 1]");
    }

    if (raw.contains("temporal_merge_mode")) {
        const auto& v = raw.at("temporal_merge_mode");
        if (v == "mean") {
            cfg.temporal_merge_mode = TemporalMergeMode::mean;
        } else if (v == "first") {
            cfg.temporal_merge_mode = TemporalMergeMode::first;
        } else {
            throw ConfigError("config field 'temporal_merge_mode' must be one of {mean, first}");
        }
    }

    if (raw.contains("pooled_grid") && !raw.at("pooled_grid").is_null()) {
        const auto& v = raw.at("pooled_grid");
        Grid grid;
        if (v.is_string()) {
            try {
                grid = parse_grid(v.get<std::string>());
            } catch (const std::exception& e) {
                throw ConfigError(std::string("config field 'pooled_grid': ") + e.what());
            }
        } else if (v.is_array() && v.size() == 2) {
            grid = {count_field(v[0], "pooled_grid", 1), count_field(v[1], "pooled_grid", 1)};
        } else {
            throw ConfigError("config field 'pooled_grid' must be \"HxW\" or [H, W]");
        }
        cfg.pooled_grid = grid;
    }

    if (raw.contains("knn_k")) {
        const auto& v = raw.at("knn_k");
        if (v.is_string() && v == "auto") {
            cfg.knn_k.reset();
        } else {
            cfg.knn_k = count_field(v, "knn_k", 1);
        }
    }

    if (raw.contains("inner_enabled")) {
        const auto& v = raw.at("inner_enabled");
        if (!v.is_boolean()) {
            throw ConfigError("config field 'inner_enabled' must be a boolean");
        }
        cfg.inner_enabled = v.get<bool>();
    }
    if (raw.contains("inner_layer_K")) {
        cfg.inner_layer_K = count_field(raw.at("inner_layer_K"), "inner_layer_K", 0);
    }
    cfg.inner_ratio_R = real_field(raw, "inner_ratio_R", cfg.inner_ratio_R);
    if (cfg.inner_ratio_R < 0.0 || cfg.inner_ratio_R >= 100.0) {
        throw ConfigError("config field 'inner_ratio_R' = " + std::to_string(cfg.inner_ratio_R) +
                          " out of range [0, 100)");
    }
    return cfg;
}

CompressionConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open config " + path);
    }
    nlohmann::json raw;
    try {
        raw = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return validate_config(raw);
}

nlohmann::json to_json(const CompressionConfig& cfg) {
    nlohmann::json j;
    j["tau"] = cfg.tau;
    j["target_ratio"] = cfg.target_ratio;
    j["temporal_merge_mode"] = to_string(cfg.temporal_merge_mode);
    if (cfg.pooled_grid) {
        j["pooled_grid"] = to_string(*cfg.pooled_grid);
    }
    if (cfg.knn_k) {
        j["knn_k"] = *cfg.knn_k;
    } else {
        j["knn_k"] = "auto";
    }
    j["inner_enabled"] = cfg.inner_enabled;
    j["inner_layer_K"] = cfg.inner_layer_K;
    j["inner_ratio_R"] = cfg.inner_ratio_R;
    return j;
}

}  // namespace tokmerge
