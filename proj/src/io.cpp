// SPDX-License-Identifier: Apache-2.0

#include "tokmerge/io.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include "tokmerge/npy.hpp"

namespace tokmerge {

namespace fs = std::filesystem;

VideoTokenStream load_token_stream(const fs::path& path, std::optional<Grid> grid) {
    auto array = npy::read(path);
    if (array.rank() != 3) {
        throw DataError(path.string() + ": token file has rank " + std::to_string(array.rank()) +
                        ", expected 3 (B, N_v, d)");
    }
    const auto frames = array.shape[0];
    const auto tokens = array.shape[1];
    const auto dim = array.shape[2];
    if (!grid) {
        const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(tokens))));
        if (side * side != tokens) {
            throw DataError(path.string() + ": N_v = " + std::to_string(tokens) +
                            " is not a perfect square; pass an explicit HxW grid");
        }
        grid = Grid{side, side};
    }
    if (grid->size() != tokens) {
        throw DataError(path.string() + ": grid " + to_string(*grid) + " has " + std::to_string(grid->size()) +
                        " cells but N_v = " + std::to_string(tokens));
    }
    try {
        return VideoTokenStream(frames, *grid, dim, std::move(array.data));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void save_stream(const fs::path& path, const VideoTokenStream& stream) {
    const std::array<std::size_t, 3> shape = {stream.frames(), stream.tokens_per_frame(), stream.dim()};
    npy::write(path, shape, stream.data());
}

Matrix load_matrix(const fs::path& path) {
    auto array = npy::read(path);
    if (array.rank() != 2) {
        throw DataError(path.string() + ": rank " + std::to_string(array.rank()) + ", expected 2");
    }
    for (std::size_t i = 0; i < array.data.size(); ++i) {
        if (!std::isfinite(array.data[i])) {
            throw DataError(path.string() + ": non-finite value at flat offset " + std::to_string(i));
        }
    }
    return Matrix(array.shape[0], array.shape[1], std::move(array.data));
}

std::vector<float> load_vector(const fs::path& path) {
    auto array = npy::read(path);
    if (array.rank() != 1) {
        throw DataError(path.string() + ": rank " + std::to_string(array.rank()) + ", expected 1");
    }
    for (std::size_t i = 0; i < array.data.size(); ++i) {
        if (!std::isfinite(array.data[i])) {
            throw DataError(path.string() + ": non-finite value at flat offset " + std::to_string(i));
        }
    }
    return std::move(array.data);
}

nlohmann::json to_json(const CompressionReport& report) {
    nlohmann::json j;
    j["original_count"] = report.original_count;
    j["after_temporal_count"] = report.after_temporal_count;
    j["final_count"] = report.final_count;
    j["temporal_prune_ratio"] = report.temporal_prune_ratio;
    j["overall_retained_ratio"] = report.overall_retained_ratio;
    j["per_video_histogram_bin"] = report.per_video_histogram_bin;
    auto segments = nlohmann::json::array();
    for (const auto& s : report.segments) {
        segments.push_back({{"start", s.start}, {"end", s.end}, {"gain", s.gain}});
    }
    j["segments"] = std::move(segments);
    const auto& f = report.flops;
    j["flops"] = {{"baseline", f.baseline},   {"prefill", f.prefill},
                  {"ratio", f.ratio},         {"decode", f.decode},
                  {"total", f.total},         {"baseline_total", f.baseline_total},
                  {"total_ratio", f.total_ratio}};
    return j;
}

CompressionReport report_from_json(const nlohmann::json& doc) {
    try {
        CompressionReport r;
        r.original_count = doc.at("original_count").get<std::size_t>();
        r.after_temporal_count = doc.at("after_temporal_count").get<std::size_t>();
        r.final_count = doc.at("final_count").get<std::size_t>();
        r.temporal_prune_ratio = doc.at("temporal_prune_ratio").get<double>();
        r.overall_retained_ratio = doc.at("overall_retained_ratio").get<double>();
        r.per_video_histogram_bin = doc.value("per_video_histogram_bin", 0.0);
        for (const auto& s : doc.at("segments")) {
            r.segments.push_back({s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>(),
                                  s.at("gain").get<std::uint64_t>()});
        }
        const auto& f = doc.at("flops");
        r.flops.baseline = f.at("baseline").get<double>();
        r.flops.prefill = f.at("prefill").get<double>();
        r.flops.ratio = f.at("ratio").get<double>();
        r.flops.decode = f.value("decode", 0.0);
        r.flops.total = f.value("total", 0.0);
        r.flops.baseline_total = f.value("baseline_total", 0.0);
        r.flops.total_ratio = f.value("total_ratio", 0.0);
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed report document: ") + e.what());
    }
}

nlohmann::json provenance_to_json(const std::vector<Provenance>& provenance) {
    auto out = nlohmann::json::array();
    for (const auto& p : provenance) {
        auto members = nlohmann::json::array();
        for (const auto& m : p.members) {
            members.push_back({m.frame, m.index});
        }
        out.push_back({{"frame", p.coord.frame},
                       {"index", p.coord.index},
                       {"kind", to_string(p.kind)},
                       {"members", std::move(members)}});
    }
    return out;
}

std::vector<Provenance> provenance_from_json(const nlohmann::json& doc) {
    std::vector<Provenance> out;
    try {
        for (const auto& item : doc) {
            Provenance p;
            p.coord = {item.at("frame").get<std::uint32_t>(), item.at("index").get<std::uint32_t>()};
            p.kind = parse_token_kind(item.at("kind").get<std::string>());
            for (const auto& m : item.at("members")) {
                p.members.push_back({m.at(0).get<std::uint32_t>(), m.at(1).get<std::uint32_t>()});
            }
            out.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed provenance: ") + e.what());
    }
    return out;
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    out << doc.dump(2) << '\n';
    if (!out) {
        throw DataError("failed writing " + path.string());
    }
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void save_compressed(const CompressedVideo& cv, const CompressionReport& report, const fs::path& out_dir) {
    if (cv.tokens.rows != cv.provenance.size()) {
        throw DataError("compressed video has " + std::to_string(cv.tokens.rows) + " token rows but " +
                        std::to_string(cv.provenance.size()) + " provenance records");
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw DataError("cannot create " + out_dir.string() + ": " + ec.message());
    }
    const std::array<std::size_t, 2> shape = {cv.tokens.rows, cv.tokens.cols};
    npy::write(out_dir / kTokensFile, shape, cv.tokens.data);
    auto doc = to_json(report);
    doc["provenance"] = provenance_to_json(cv.provenance);
    write_json(out_dir / kReportFile, doc);
}

LoadedCompressed load_compressed(const fs::path& out_dir) {
    auto array = npy::read(out_dir / kTokensFile);
    if (array.rank() != 2) {
        throw DataError((out_dir / kTokensFile).string() + ": rank " + std::to_string(array.rank()) +
                        ", expected 2");
    }
    const auto doc = read_json(out_dir / kReportFile);
    LoadedCompressed out;
    out.video.tokens = Matrix(array.shape[0], array.shape[1], std::move(array.data));
    out.video.provenance = provenance_from_json(doc.at("provenance"));
    out.report = report_from_json(doc);
    if (out.video.provenance.size() != out.video.tokens.rows) {
        throw DataError(out_dir.string() + ": provenance/token count mismatch");
    }
    return out;
}

}  // namespace tokmerge
