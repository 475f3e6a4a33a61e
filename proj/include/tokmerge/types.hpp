// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tokmerge {

/// Malformed or inconsistent input data (bad files, shape mismatches, non-finite values).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Out-of-range or contradictory configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Grid {
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const { return rows * cols; }
    bool operator==(const Grid&) const = default;
};

/// Parses "HxW" (e.g. "14x14").
Grid parse_grid(const std::string& text);
std::string to_string(const Grid& grid);

/// Dense row-major float matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}
    Matrix(std::size_t r, std::size_t c, std::vector<float> values);

    std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    float& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    float at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool operator==(const Matrix&) const = default;
};

/// B frames x N_v tokens x d features, the raw pipeline input.
class VideoTokenStream {
public:
    VideoTokenStream() = default;
    /// Validates shape, grid and finiteness; throws DataError.
    VideoTokenStream(std::size_t frames, Grid grid, std::size_t dim, std::vector<float> data);

    std::size_t frames() const { return m_frames; }
    std::size_t tokens_per_frame() const { return m_grid.size(); }
    std::size_t dim() const { return m_dim; }
    const Grid& grid() const { return m_grid; }
    std::size_t token_count() const { return m_frames * m_grid.size(); }

    std::span<const float> token(std::size_t frame, std::size_t index) const {
        return {m_data.data() + (frame * m_grid.size() + index) * m_dim, m_dim};
    }
    std::span<const float> frame(std::size_t f) const {
        return {m_data.data() + f * m_grid.size() * m_dim, m_grid.size() * m_dim};
    }
    const std::vector<float>& data() const { return m_data; }

private:
    std::size_t m_frames = 0;
    Grid m_grid;
    std::size_t m_dim = 0;
    std::vector<float> m_data;
};

/// Coordinate of an original token: frame and spatial index within the token grid.
struct TokenCoord {
    std::uint32_t frame = 0;
    std::uint32_t index = 0;

    auto operator<=>(const TokenCoord&) const = default;
};

enum class TokenKind { selected, temporal_rep, cluster_rep };

const char* to_string(TokenKind kind);
TokenKind parse_token_kind(const std::string& text);

struct Provenance {
    TokenCoord coord;
    TokenKind kind = TokenKind::selected;
    /// Original tokens absorbed into this survivor (never includes `coord` itself).
    std::vector<TokenCoord> members;

    bool operator==(const Provenance&) const = default;
};

/// Surviving tokens (M x d) with one provenance record per row, ascending by coordinate.
struct CompressedVideo {
    Matrix tokens;
    std::vector<Provenance> provenance;

    std::size_t size() const { return provenance.size(); }
    bool operator==(const CompressedVideo&) const = default;
};

struct SegmentSummary {
    std::size_t start = 0;
    std::size_t end = 0;
    std::uint64_t gain = 0;

    bool operator==(const SegmentSummary&) const = default;
};

struct FlopsSummary {
    double baseline = 0.0;       // prefill, all layers at B*N_v tokens
    double prefill = 0.0;
    double ratio = 0.0;          // prefill / baseline
    double decode = 0.0;
    double total = 0.0;          // prefill + decode
    double baseline_total = 0.0;
    double total_ratio = 0.0;

    bool operator==(const FlopsSummary&) const = default;
};

struct CompressionReport {
    std::size_t original_count = 0;
    std::size_t after_temporal_count = 0;
    std::size_t final_count = 0;
    double temporal_prune_ratio = 0.0;
    double overall_retained_ratio = 0.0;
    std::vector<SegmentSummary> segments;
    FlopsSummary flops;
    /// Lower edge of the 20-bin [0,1] histogram bin holding temporal_prune_ratio.
    double per_video_histogram_bin = 0.0;

    bool operator==(const CompressionReport&) const = default;
};

constexpr std::size_t kHistogramBins = 20;

/// Bin index in [0, kHistogramBins) for a ratio in [0,1]; 1.0 lands in the last bin.
std::size_t histogram_bin(double ratio);

}  // namespace tokmerge
