// SPDX-License-Identifier: Apache-2.0

#include "tokmerge/temporal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace tokmerge::temporal {

namespace {

void check_span(const RedundancyMask& mask, std::size_t start, std::size_t end) {
    if (start >= end || end > mask.frames()) {
        throw std::out_of_range("frame span [" + std::to_string(start) + ", " + std::to_string(end) +
                                ") is outside [0, " + std::to_string(mask.frames()) + ")");
    }
}

std::size_t popcount(std::span<const std::uint64_t> words) {
    std::size_t n = 0;
    for (auto w : words) {
        n += static_cast<std::size_t>(std::popcount(w));
    }
    return n;
}

// AND of mask rows [start, end-1), i.e. the slots persisting over the whole span.
std::vector<std::uint64_t> persistent_words(const RedundancyMask& mask, std::size_t start, std::size_t end) {
    std::vector<std::uint64_t> acc(mask.words_per_row(), ~std::uint64_t{0});
    if (mask.cols() % 64 != 0 && !acc.empty()) {
        acc.back() = (std::uint64_t{1} << (mask.cols() % 64)) - 1;
    }
    for (std::size_t m = start; m + 1 < end; ++m) {
        const auto row = mask.row_words(m);
        for (std::size_t w = 0; w < acc.size(); ++w) {
            acc[w] &= row[w];
        }
    }
    return acc;
}

}  // namespace

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i];
        const double y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

RedundancyMask::RedundancyMask(std::size_t rows, std::size_t cols)
    : m_rows(rows), m_cols(cols), m_words((cols + 63) / 64), m_bits(rows * m_words, 0) {}

void RedundancyMask::set(std::size_t m, std::size_t k, bool value) {
    auto& word = m_bits[m * m_words + k / 64];
    const auto bit = std::uint64_t{1} << (k % 64);
    word = value ? (word | bit) : (word & ~bit);
}

RedundancyMask pairwise_redundancy(const VideoTokenStream& stream, double tau) {
    const auto frames = stream.frames();
    const auto n = stream.tokens_per_frame();
    RedundancyMask mask(frames - 1, n);
    for (std::size_t m = 0; m + 1 < frames; ++m) {
        for (std::size_t k = 0; k < n; ++k) {
            if (cosine_similarity(stream.token(m, k), stream.token(m + 1, k)) > tau) {
                mask.set(m, k);
            }
        }
    }
    return mask;
}

std::size_t persistent_token_count(const RedundancyMask& mask, std::size_t start, std::size_t end) {
    check_span(mask, start, end);
    if (end - start < 2) {
        // No consecutive pair to test; every slot trivially persists but nothing is prunable.
        return mask.cols();
    }
    return popcount(persistent_words(mask, start, end));
}

std::uint64_t segment_gain(const RedundancyMask& mask, std::size_t start, std::size_t end) {
    check_span(mask, start, end);
    if (end - start < 2) {
        return 0;
    }
    return static_cast<std::uint64_t>(persistent_token_count(mask, start, end)) * (end - start - 1);
}

SegmentPlan optimal_segmentation(const RedundancyMask& mask) {
    const auto frames = mask.frames();
    const auto words = mask.words_per_row();
    SegmentPlan plan;
    plan.dp.assign(frames + 1, 0);
    plan.prev.assign(frames + 1, 0);

    std::vector<std::uint64_t> acc(words);
    for (std::size_t end = 1; end <= frames; ++end) {
        // Walk starts downwards so the running AND covers rows [start, end-1).
        std::uint64_t best = plan.dp[end - 1];
        std::size_t best_start = end - 1;
        std::fill(acc.begin(), acc.end(), ~std::uint64_t{0});
        bool any = true;
        for (std::size_t start = end - 1; start-- > 0;) {
            std::uint64_t gain = 0;
            if (any) {
                const auto row = mask.row_words(start);
                std::size_t count = 0;
                any = false;
                for (std::size_t w = 0; w < words; ++w) {
                    acc[w] &= row[w];
                    count += static_cast<std::size_t>(std::popcount(acc[w]));
                    any = any || acc[w] != 0;
                }
                gain = static_cast<std::uint64_t>(count) * (end - start - 1);
            }
            const auto value = plan.dp[start] + gain;
            if (value >= best) {
                best = value;
                best_start = start;
            }
        }
        plan.dp[end] = best;
        plan.prev[end] = best_start;
    }

    for (std::size_t at = frames; at > 0; at = plan.prev[at]) {
        plan.boundaries.push_back(at);
    }
    plan.boundaries.push_back(0);
    std::reverse(plan.boundaries.begin(), plan.boundaries.end());
    for (std::size_t s = 0; s + 1 < plan.boundaries.size(); ++s) {
        plan.gains.push_back(segment_gain(mask, plan.boundaries[s], plan.boundaries[s + 1]));
        plan.total_gain += plan.gains.back();
    }
    return plan;
}

TemporalMergeResult apply_temporal_merge(const VideoTokenStream& stream, const SegmentPlan& plan,
                                         const RedundancyMask& mask, TemporalMergeMode mode) {
    const auto frames = stream.frames();
    const auto n = stream.tokens_per_frame();
    const auto dim = stream.dim();
    if (mask.frames() != frames || mask.cols() != n) {
        throw DataError("redundancy mask is " + std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()) +
                        " but the stream needs " + std::to_string(frames - 1) + "x" + std::to_string(n));
    }
    if (plan.boundaries.size() < 2 || plan.boundaries.front() != 0 || plan.boundaries.back() != frames) {
        throw DataError("segment plan does not tile [0, " + std::to_string(frames) + ")");
    }

    TemporalMergeResult result;
    result.frames = frames;
    result.grid = stream.grid();
    result.dim = dim;
    result.original_count = stream.token_count();
    result.non_redundant.resize(frames);

    std::vector<char> redundant_slot(n);
    std::vector<double> sum(dim);
    for (std::size_t s = 0; s + 1 < plan.boundaries.size(); ++s) {
        const auto start = plan.boundaries[s];
        const auto end = plan.boundaries[s + 1];
        if (start >= end) {
            throw DataError("segment plan boundaries are not strictly ascending");
        }
        SegmentMerge seg;
        seg.start = start;
        seg.end = end;
        std::fill(redundant_slot.begin(), redundant_slot.end(), 0);
        if (end - start >= 2) {
            const auto acc = persistent_words(mask, start, end);
            for (std::size_t k = 0; k < n; ++k) {
                if ((acc[k / 64] >> (k % 64)) & 1u) {
                    redundant_slot[k] = 1;
                    seg.redundant.push_back(static_cast<std::uint32_t>(k));
                }
            }
        }

        seg.merged = Matrix(seg.redundant.size(), dim);
        const double span = static_cast<double>(end - start);
        for (std::size_t r = 0; r < seg.redundant.size(); ++r) {
            const auto k = seg.redundant[r];
            auto out = seg.merged.row(r);
            if (mode == TemporalMergeMode::first) {
                std::ranges::copy(stream.token(start, k), out.begin());
                continue;
            }
            std::fill(sum.begin(), sum.end(), 0.0);
            for (std::size_t f = start; f < end; ++f) {
                const auto tok = stream.token(f, k);
                for (std::size_t c = 0; c < dim; ++c) {
                    sum[c] += tok[c];
                }
            }
            for (std::size_t c = 0; c < dim; ++c) {
                out[c] = static_cast<float>(sum[c] / span);
            }
        }
        result.pruned_count += seg.redundant.size() * (end - start - 1);

        std::vector<std::uint32_t> keep;
        keep.reserve(n - seg.redundant.size());
        for (std::size_t k = 0; k < n; ++k) {
            if (!redundant_slot[k]) {
                keep.push_back(static_cast<std::uint32_t>(k));
            }
        }
        for (std::size_t f = start; f < end; ++f) {
            auto& fs = result.non_redundant[f];
            fs.indices = keep;
            fs.values = Matrix(keep.size(), dim);
            for (std::size_t i = 0; i < keep.size(); ++i) {
                std::ranges::copy(stream.token(f, keep[i]), fs.values.row(i).begin());
            }
        }
        result.segments.push_back(std::move(seg));
    }
    return result;
}

}  // namespace tokmerge::temporal
