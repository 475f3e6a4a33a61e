// SPDX-License-Identifier: Apache-2.0

#include "tokmerge/types.hpp"

#include <cmath>

namespace tokmerge {

Grid parse_grid(const std::string& text) {
    const auto x = text.find_first_of("xX");
    if (x == std::string::npos || x == 0 || x + 1 >= text.size()) {
        throw std::invalid_argument("grid '" + text + "' must look like HxW");
    }
    auto parse_dim = [&](const std::string& part) {
        std::size_t consumed = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(part, &consumed);
        } catch (const std::exception&) {
            consumed = 0;
        }
        if (consumed != part.size() || v == 0 || part.front() == '-' || part.front() == '+') {
            throw std::invalid_argument("grid '" + text + "' must look like HxW with positive H, W");
        }
        return static_cast<std::size_t>(v);
    };
    return {parse_dim(text.substr(0, x)), parse_dim(text.substr(x + 1))};
}

std::string to_string(const Grid& grid) {
    return std::to_string(grid.rows) + "x" + std::to_string(grid.cols);
}

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<float> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != rows * cols) {
        throw DataError("matrix " + std::to_string(rows) + "x" + std::to_string(cols) + " given " +
                        std::to_string(data.size()) + " values");
    }
}

VideoTokenStream::VideoTokenStream(std::size_t frames, Grid grid, std::size_t dim, std::vector<float> data)
    : m_frames(frames), m_grid(grid), m_dim(dim), m_data(std::move(data)) {
    if (m_frames == 0 || m_grid.size() == 0 || m_dim == 0) {
        throw DataError("token stream needs B >= 1, N_v >= 1, d >= 1 (got B=" + std::to_string(m_frames) +
                        ", N_v=" + std::to_string(m_grid.size()) + ", d=" + std::to_string(m_dim) + ")");
    }
    const auto expected = m_frames * m_grid.size() * m_dim;
    if (m_data.size() != expected) {
        throw DataError("token stream data has " + std::to_string(m_data.size()) + " values, expected " +
                        std::to_string(expected));
    }
    for (std::size_t i = 0; i < m_data.size(); ++i) {
        if (!std::isfinite(m_data[i])) {
            throw DataError("token stream has a non-finite value at flat offset " + std::to_string(i));
        }
    }
}

const char* to_string(TokenKind kind) {
    switch (kind) {
        case TokenKind::selected:
            return "selected";
        case TokenKind::temporal_rep:
            return "temporal_rep";
        case TokenKind::cluster_rep:
            return "cluster_rep";
    }
    return "selected";
}

TokenKind parse_token_kind(const std::string& text) {
    if (text == "selected") {
        return TokenKind::selected;
    }
    if (text == "temporal_rep") {
        return TokenKind::temporal_rep;
    }
    if (text == "cluster_rep") {
        return TokenKind::cluster_rep;
    }
    throw DataError("unknown token kind '" + text + "'");
}

std::size_t histogram_bin(double ratio) {
    if (!(ratio > 0.0)) {
        return 0;
    }
    const auto bin = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(kHistogramBins)));
    return bin >= kHistogramBins ? kHistogramBins - 1 : bin;
}

}  // namespace tokmerge
