// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"
#include "tokmerge/types.hpp"

namespace tokmerge {

/// Loads a (B, N_v, d) .npy token file. If `grid` is unset, N_v must be a perfect square.
VideoTokenStream load_token_stream(const std::filesystem::path& path, std::optional<Grid> grid = std::nullopt);
void save_stream(const std::filesystem::path& path, const VideoTokenStream& stream);

/// Loads a rank-2 .npy array (e.g. hidden states (N, d)).
Matrix load_matrix(const std::filesystem::path& path);
/// Loads a rank-1 .npy array (e.g. a last-token attention row (N,)).
std::vector<float> load_vector(const std::filesystem::path& path);

/// File names inside an output directory.
inline constexpr const char* kTokensFile = "tokens.npy";
inline constexpr const char* kReportFile = "report.json";

nlohmann::json to_json(const CompressionReport& report);
CompressionReport report_from_json(const nlohmann::json& doc);
nlohmann::json provenance_to_json(const std::vector<Provenance>& provenance);
std::vector<Provenance> provenance_from_json(const nlohmann::json& doc);

/// Writes tokens.npy (M, d) and report.json (report fields plus "provenance").
void save_compressed(const CompressedVideo& cv, const CompressionReport& report, const std::filesystem::path& out_dir);

struct LoadedCompressed {
    CompressedVideo video;
    CompressionReport report;
};
LoadedCompressed load_compressed(const std::filesystem::path& out_dir);

/// Writes `doc` with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace tokmerge
