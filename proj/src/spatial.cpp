// SPDX-License-Identifier: Apache-2.0

#include "tokmerge/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>

namespace tokmerge::spatial {

namespace {

double squared_distance(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += diff * diff;
    }
    return acc;
}

struct OutputToken {
    Provenance provenance;
    std::span<const float> value;
};

// Coordinates absorbed by the temporal stage for slot `index` of segment `seg`.
void append_temporal_members(const temporal::SegmentMerge& seg, std::uint32_t index, std::vector<TokenCoord>& out) {
    for (auto f = seg.start + 1; f < seg.end; ++f) {
        out.push_back({static_cast<std::uint32_t>(f), index});
    }
}

CompressedVideo assemble(std::vector<OutputToken> tokens, std::size_t dim) {
    std::ranges::sort(tokens, {}, [](const OutputToken& t) { return t.provenance.coord; });
    CompressedVideo cv;
    cv.tokens = Matrix(tokens.size(), dim);
    cv.provenance.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::ranges::copy(tokens[i].value, cv.tokens.row(i).begin());
        cv.provenance.push_back(std::move(tokens[i].provenance));
    }
    return cv;
}

void check_grid(const temporal::TemporalMergeResult& tmr, const ImportanceMap* importance,
                const CompressionConfig& cfg) {
    if (cfg.pooled_grid && *cfg.pooled_grid != tmr.grid) {
        throw DataError("config pooled_grid " + to_string(*cfg.pooled_grid) + " does not match the token grid " +
                        to_string(tmr.grid));
    }
    if (importance != nullptr) {
        if (importance->pooled_grid != tmr.grid) {
            throw DataError("importance map pooled to " + to_string(importance->pooled_grid) +
                            " but the token grid is " + to_string(tmr.grid));
        }
        if (importance->frames != tmr.frames) {
            throw DataError("importance map has " + std::to_string(importance->frames) + " frames, tokens have " +
                            std::to_string(tmr.frames));
        }
    }
}

}  // namespace

Matrix frame_attention(const Matrix& q, const Matrix& k) {
    if (q.rows != k.rows || q.cols != k.cols) {
        throw DataError("query " + std::to_string(q.rows) + "x" + std::to_string(q.cols) + " and key " +
                        std::to_string(k.rows) + "x" + std::to_string(k.cols) + " shapes differ");
    }
    if (q.cols == 0) {
        throw DataError("attention needs d >= 1");
    }
    const auto n = q.rows;
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols));
    Matrix out(n, n);
    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto qi = q.row(i);
        double max_logit = -INFINITY;
        for (std::size_t j = 0; j < n; ++j) {
            const auto kj = k.row(j);
            double dot = 0.0;
            for (std::size_t c = 0; c < q.cols; ++c) {
                dot += static_cast<double>(qi[c]) * kj[c];
            }
            logits[j] = dot * scale;
            max_logit = std::max(max_logit, logits[j]);
        }
        double sum = 0.0;
        for (auto& l : logits) {
            l = std::exp(l - max_logit);
            sum += l;
        }
        auto row = out.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            row[j] = static_cast<float>(logits[j] / sum);
        }
    }
    return out;
}

std::vector<float> importance_scores(const Matrix& attention) {
    if (attention.rows != attention.cols) {
        throw DataError("attention matrix is " + std::to_string(attention.rows) + "x" +
                        std::to_string(attention.cols) + ", expected square");
    }
    const auto n = attention.rows;
    std::vector<double> sums(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = attention.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            sums[j] += row[j];
        }
    }
    std::vector<float> scores(n);
    for (std::size_t j = 0; j < n; ++j) {
        scores[j] = static_cast<float>(sums[j] / static_cast<double>(n));
    }
    return scores;
}

Matrix pool_importance(const Matrix& raw, Grid pooled) {
    if (pooled.rows == 0 || pooled.cols == 0 || pooled.rows > raw.rows || pooled.cols > raw.cols) {
        throw DataError("cannot pool a " + std::to_string(raw.rows) + "x" + std::to_string(raw.cols) +
                        " grid to " + to_string(pooled));
    }
    Matrix out(pooled.rows, pooled.cols);
    for (std::size_t i = 0; i < pooled.rows; ++i) {
        const auto r0 = i * raw.rows / pooled.rows;
        const auto r1 = (i + 1) * raw.rows / pooled.rows;
        for (std::size_t j = 0; j < pooled.cols; ++j) {
            const auto c0 = j * raw.cols / pooled.cols;
            const auto c1 = (j + 1) * raw.cols / pooled.cols;
            double sum = 0.0;
            for (auto r = r0; r < r1; ++r) {
                for (auto c = c0; c < c1; ++c) {
                    sum += raw.at(r, c);
                }
            }
            out.at(i, j) = static_cast<float>(sum / static_cast<double>((r1 - r0) * (c1 - c0)));
        }
    }
    return out;
}

std::vector<std::size_t> attention_select(std::span<const float> scores, std::size_t keep) {
    if (keep > scores.size()) {
        throw std::invalid_argument("cannot keep " + std::to_string(keep) + " of " + std::to_string(scores.size()) +
                                    " tokens");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto higher = [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), higher);
    order.resize(keep);
    std::ranges::sort(order);
    return order;
}

ImportanceMap importance_from_attention(std::span<const float> attention, std::size_t frames, Grid raw_grid,
                                        Grid pooled_grid) {
    const auto n = raw_grid.size();
    if (attention.size() != frames * n * n) {
        throw DataError("attention dump has " + std::to_string(attention.size()) + " values, expected " +
                        std::to_string(frames) + "x" + std::to_string(n) + "x" + std::to_string(n));
    }
    ImportanceMap map{frames, raw_grid, pooled_grid, Matrix(frames, n), Matrix(frames, pooled_grid.size())};
    for (std::size_t f = 0; f < frames; ++f) {
        const auto block = attention.subspan(f * n * n, n * n);
        const Matrix a(n, n, std::vector<float>(block.begin(), block.end()));
        const auto scores = importance_scores(a);
        std::ranges::copy(scores, map.raw.row(f).begin());
        const auto pooled = pool_importance(Matrix(raw_grid.rows, raw_grid.cols, scores), pooled_grid);
        std::ranges::copy(pooled.data, map.pooled.row(f).begin());
    }
    return map;
}

ImportanceMap importance_from_qk(std::span<const float> q, std::span<const float> k, std::size_t frames,
                                 std::size_t dim, Grid raw_grid, Grid pooled_grid) {
    const auto n = raw_grid.size();
    if (q.size() != frames * n * dim || k.size() != q.size()) {
        throw DataError("query/key dumps must both be " + std::to_string(frames) + "x" + std::to_string(n) + "x" +
                        std::to_string(dim));
    }
    ImportanceMap map{frames, raw_grid, pooled_grid, Matrix(frames, n), Matrix(frames, pooled_grid.size())};
    for (std::size_t f = 0; f < frames; ++f) {
        const auto qf = q.subspan(f * n * dim, n * dim);
        const auto kf = k.subspan(f * n * dim, n * dim);
        const auto a = frame_attention(Matrix(n, dim, {qf.begin(), qf.end()}), Matrix(n, dim, {kf.begin(), kf.end()}));
        const auto scores = importance_scores(a);
        std::ranges::copy(scores, map.raw.row(f).begin());
        const auto pooled = pool_importance(Matrix(raw_grid.rows, raw_grid.cols, scores), pooled_grid);
        std::ranges::copy(pooled.data, map.pooled.row(f).begin());
    }
    return map;
}

std::size_t auto_knn_k(std::size_t n) {
    if (n <= 1) {
        return 0;
    }
    const auto root = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
    return std::min(std::max<std::size_t>(2, root), n - 1);
}

ClusterState dpc_knn_cluster(const Matrix& tokens, std::size_t k, std::size_t c) {
    const auto n = tokens.rows;
    if (n == 0) {
        throw std::invalid_argument("dpc_knn_cluster: empty input");
    }
    if (c == 0) {
        throw std::invalid_argument("dpc_knn_cluster: need at least one center");
    }
    if (n > 1 && (k == 0 || k >= n)) {
        throw std::invalid_argument("dpc_knn_cluster: k = " + std::to_string(k) + " must lie in [1, " +
                                    std::to_string(n - 1) + "]");
    }
    if (n == 1) {
        k = 0;
    }

    std::vector<double> dist2(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto d = squared_distance(tokens.row(i), tokens.row(j));
            dist2[i * n + j] = d;
            dist2[j * n + i] = d;
        }
    }

    ClusterState state;
    state.k_used = k;
    state.rho.resize(n);
    state.delta.resize(n);
    state.gamma.resize(n);

    std::vector<double> others;
    others.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        others.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                others.push_back(dist2[i * n + j]);
            }
        }
        const auto kth = others.begin() + static_cast<std::ptrdiff_t>(k);
        std::partial_sort(others.begin(), kth, others.end());
        double sum = 0.0;
        for (auto it = others.begin(); it != kth; ++it) {
            sum += *it;
        }
        state.rho[i] = k == 0 ? 1.0 : std::exp(-sum / static_cast<double>(k));
    }

    const double rho_max = *std::ranges::max_element(state.rho);
    for (std::size_t i = 0; i < n; ++i) {
        if (state.rho[i] == rho_max) {
            double far = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) {
                    far = std::max(far, dist2[i * n + j]);
                }
            }
            state.delta[i] = std::sqrt(far);
        } else {
            double nearest = INFINITY;
            for (std::size_t j = 0; j < n; ++j) {
                if (state.rho[j] > state.rho[i]) {
                    nearest = std::min(nearest, dist2[i * n + j]);
                }
            }
            state.delta[i] = std::sqrt(nearest);
        }
        state.gamma[i] = state.rho[i] * state.delta[i];
    }

    const auto count = std::min(c, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          return state.gamma[a] != state.gamma[b] ? state.gamma[a] > state.gamma[b] : a < b;
                      });
    state.centers.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
    std::ranges::sort(state.centers);

    state.assignment.assign(n, 0);
    std::vector<long long> center_pos(n, -1);
    for (std::size_t p = 0; p < state.centers.size(); ++p) {
        center_pos[state.centers[p]] = static_cast<long long>(p);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (center_pos[i] >= 0) {
            state.assignment[i] = static_cast<std::size_t>(center_pos[i]);
            continue;
        }
        std::size_t best = 0;
        double best_d = INFINITY;
        for (std::size_t p = 0; p < state.centers.size(); ++p) {
            const auto d = dist2[i * n + state.centers[p]];
            if (d < best_d) {
                best_d = d;
                best = p;
            }
        }
        state.assignment[i] = best;
    }
    return state;
}

ClusterRepresentatives merge_clusters(const Matrix& tokens, const ClusterState& state) {
    const auto dim = tokens.cols;
    ClusterRepresentatives reps;
    reps.centers = state.centers;
    reps.members.resize(state.centers.size());
    for (std::size_t i = 0; i < tokens.rows; ++i) {
        const auto p = state.assignment[i];
        if (state.centers[p] != i) {
            reps.members[p].push_back(i);
        }
    }
    reps.values = Matrix(state.centers.size(), dim);
    std::vector<double> sum(dim);
    for (std::size_t p = 0; p < state.centers.size(); ++p) {
        std::ranges::fill(sum, 0.0);
        auto add = [&](std::size_t i) {
            const auto row = tokens.row(i);
            for (std::size_t c = 0; c < dim; ++c) {
                sum[c] += row[c];
            }
        };
        add(state.centers[p]);
        for (auto m : reps.members[p]) {
            add(m);
        }
        const double size = static_cast<double>(reps.members[p].size() + 1);
        auto out = reps.values.row(p);
        for (std::size_t c = 0; c < dim; ++c) {
            out[c] = static_cast<float>(sum[c] / size);
        }
    }
    return reps;
}

std::size_t group_budget(std::size_t group_size, std::size_t target, std::size_t survivors) {
    if (survivors == 0) {
        return 0;
    }
    const auto num = static_cast<unsigned long long>(group_size) * target;
    return static_cast<std::size_t>((num + survivors - 1) / survivors);
}

std::size_t retained_target(double target_ratio, std::size_t count) {
    const double exact = target_ratio * static_cast<double>(count);
    const double nearest = std::round(exact);
    // Absorb representation error such as 0.15 * 100 = 15.000000000000002.
    if (std::abs(exact - nearest) <= 1e-9 * std::max(1.0, exact)) {
        return static_cast<std::size_t>(nearest);
    }
    return static_cast<std::size_t>(std::ceil(exact));
}

CompressedVideo temporal_survivors(const temporal::TemporalMergeResult& tmr) {
    std::vector<OutputToken> out;
    out.reserve(tmr.survivor_count());
    for (const auto& seg : tmr.segments) {
        for (std::size_t r = 0; r < seg.redundant.size(); ++r) {
            Provenance p{{static_cast<std::uint32_t>(seg.start), seg.redundant[r]}, TokenKind::temporal_rep, {}};
            append_temporal_members(seg, seg.redundant[r], p.members);
            out.push_back({std::move(p), seg.merged.row(r)});
        }
    }
    for (std::size_t f = 0; f < tmr.frames; ++f) {
        const auto& fs = tmr.non_redundant[f];
        for (std::size_t i = 0; i < fs.indices.size(); ++i) {
            out.push_back({{{static_cast<std::uint32_t>(f), fs.indices[i]}, TokenKind::selected, {}}, fs.values.row(i)});
        }
    }
    return assemble(std::move(out), tmr.dim);
}

CompressedVideo spatial_merge(const temporal::TemporalMergeResult& tmr, const ImportanceMap* importance,
                              const CompressionConfig& cfg) {
    check_grid(tmr, importance, cfg);
    const auto survivors = tmr.survivor_count();
    const auto target = retained_target(cfg.target_ratio, tmr.original_count);
    if (survivors <= target) {
        return temporal_survivors(tmr);
    }
    if (importance == nullptr) {
        throw DataError("spatial merging needs attention input: " + std::to_string(survivors) +
                        " temporal survivors exceed the target of " + std::to_string(target));
    }

    std::vector<OutputToken> out;
    out.reserve(target + tmr.frames + tmr.segments.size());

    std::vector<float> scores;
    for (std::size_t f = 0; f < tmr.frames; ++f) {
        const auto& fs = tmr.non_redundant[f];
        if (fs.indices.empty()) {
            continue;
        }
        const auto frame_scores = importance->pooled_frame(f);
        scores.clear();
        for (auto idx : fs.indices) {
            scores.push_back(frame_scores[idx]);
        }
        const auto keep = group_budget(fs.indices.size(), target, survivors);
        for (auto pos : attention_select(scores, keep)) {
            out.push_back({{{static_cast<std::uint32_t>(f), fs.indices[pos]}, TokenKind::selected, {}},
                           fs.values.row(pos)});
        }
    }

    // Representative rows must outlive `out`, which holds spans into them.
    std::deque<ClusterRepresentatives> reps_storage;
    for (const auto& seg : tmr.segments) {
        const auto n = seg.redundant.size();
        if (n == 0) {
            continue;
        }
        const auto centers = group_budget(n, target, survivors);
        const auto k = n == 1 ? 0 : (cfg.knn_k ? std::min(*cfg.knn_k, n - 1) : auto_knn_k(n));
        const auto state = dpc_knn_cluster(seg.merged, k, centers);
        const auto& reps = reps_storage.emplace_back(merge_clusters(seg.merged, state));
        for (std::size_t p = 0; p < reps.centers.size(); ++p) {
            const auto slot = seg.redundant[reps.centers[p]];
            Provenance prov{{static_cast<std::uint32_t>(seg.start), slot},
                            reps.members[p].empty() ? TokenKind::temporal_rep : TokenKind::cluster_rep,
                            {}};
            append_temporal_members(seg, slot, prov.members);
            for (auto m : reps.members[p]) {
                prov.members.push_back({static_cast<std::uint32_t>(seg.start), seg.redundant[m]});
                append_temporal_members(seg, seg.redundant[m], prov.members);
            }
            std::ranges::sort(prov.members);
            out.push_back({std::move(prov), reps.values.row(p)});
        }
    }
    return assemble(std::move(out), tmr.dim);
}

}  // namespace tokmerge::spatial
