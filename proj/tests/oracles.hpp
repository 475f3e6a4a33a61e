// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference computations used by the tests. Nothing here calls into the
// library's algorithms; inputs are plain vectors.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using BoolMatrix = std::vector<std::vector<char>>;  // rows = B-1 frame pairs, cols = N_v slots

/// Prunable-token gain of frames [start, end) straight from the indicator matrix.
inline std::uint64_t segment_gain(const BoolMatrix& mask, std::size_t cols, std::size_t start, std::size_t end) {
    if (end - start < 2) {
        return 0;
    }
    std::uint64_t persistent = 0;
    for (std::size_t k = 0; k < cols; ++k) {
        bool all = true;
        for (std::size_t m = start; m + 2 <= end; ++m) {
            all = all && mask[m][k];
        }
        persistent += all ? 1 : 0;
    }
    return persistent * (end - start - 1);
}

/// Maximum total gain over all 2^(B-1) segmentations of [0, B).
inline std::uint64_t exhaustive_best_gain(const BoolMatrix& mask, std::size_t frames, std::size_t cols) {
    std::uint64_t best = 0;
    const std::size_t cuts = frames - 1;
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << cuts); ++bits) {
        std::uint64_t total = 0;
        std::size_t start = 0;
        for (std::size_t c = 0; c < cuts; ++c) {
            if ((bits >> c) & 1u) {
                total += segment_gain(mask, cols, start, c + 1);
                start = c + 1;
            }
        }
        total += segment_gain(mask, cols, start, frames);
        best = std::max(best, total);
    }
    return best;
}

using Points = std::vector<std::vector<double>>;

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

struct DpcResult {
    std::vector<double> rho, delta, gamma;
    std::vector<std::size_t> centers;     // ascending
    std::vector<std::size_t> assignment;  // index into centers
};

/// Density-peak clustering evaluated literally: local density from the k nearest neighbours,
/// delta to the nearest denser point (or the farthest point for the densest), gamma = rho * delta,
/// top-c gamma with smaller index winning ties, nearest-center assignment with earlier center winning ties.
inline DpcResult dpc(const Points& pts, std::size_t k, std::size_t c) {
    const auto n = pts.size();
    DpcResult r;
    r.rho.resize(n);
    r.delta.resize(n);
    r.gamma.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> d;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                d.push_back(sq_dist(pts[i], pts[j]));
            }
        }
        std::sort(d.begin(), d.end());
        double s = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
            s += d[t];
        }
        r.rho[i] = k == 0 ? 1.0 : std::exp(-s / static_cast<double>(k));
    }
    const double top = *std::max_element(r.rho.begin(), r.rho.end());
    for (std::size_t i = 0; i < n; ++i) {
        double v = r.rho[i] == top ? 0.0 : std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            const double dist = std::sqrt(sq_dist(pts[i], pts[j]));
            if (r.rho[i] == top) {
                v = std::max(v, dist);
            } else if (r.rho[j] > r.rho[i]) {
                v = std::min(v, dist);
            }
        }
        r.delta[i] = v;
        r.gamma[i] = r.rho[i] * r.delta[i];
    }
    // Selection by repeated argmax.
    std::vector<char> taken(n, 0);
    for (std::size_t t = 0; t < std::min(c, n); ++t) {
        std::size_t best = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (!taken[i] && (best == n || r.gamma[i] > r.gamma[best])) {
                best = i;
            }
        }
        taken[best] = 1;
        r.centers.push_back(best);
    }
    std::sort(r.centers.begin(), r.centers.end());
    r.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < r.centers.size(); ++p) {
            if (r.centers[p] == i) {
                best = p;
                break;
            }
            const double d = sq_dist(pts[i], pts[r.centers[p]]);
            if (d < bd) {
                bd = d;
                best = p;
            }
        }
        r.assignment[i] = best;
    }
    return r;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return dot / std::sqrt(na * nb);
}

/// Index of `retained` with the highest cosine to `x` (first one wins ties).
inline std::size_t cosine_argmax(const Points& rows, std::size_t x, const std::vector<std::size_t>& retained) {
    std::size_t best = retained.front();
    double bs = -2.0;
    for (auto r : retained) {
        const double s = cosine(rows[x], rows[r]);
        if (s > bs) {
            bs = s;
            best = r;
        }
    }
    return best;
}

inline std::vector<double> mean_of(const Points& rows, const std::vector<std::size_t>& members) {
    std::vector<double> m(rows.front().size(), 0.0);
    for (auto i : members) {
        for (std::size_t c = 0; c < m.size(); ++c) {
            m[c] += rows[i][c];
        }
    }
    for (auto& v : m) {
        v /= static_cast<double>(members.size());
    }
    return m;
}

/// max_i |a_i - b_i| / |b_i| (denominator floored at 1e-12)
template <class A, class B>
double max_rel_err(const A& a, const B& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double denom = std::max(1e-12, std::abs(static_cast<double>(b[i])));
        worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])) / denom);
    }
    return worst;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
    static std::mt19937_64 gen(std::random_device{}());
    auto dir = std::filesystem::temp_directory_path() / ("tokmerge_" + tag + "_" + std::to_string(gen()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace oracle
