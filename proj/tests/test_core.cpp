// SPDX-License-Identifier: Apache-2.0

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "tokmerge/config.hpp"
#include "tokmerge/io.hpp"
#include "tokmerge/npy.hpp"

using namespace tokmerge;

namespace {

VideoTokenStream ramp_stream(std::size_t frames, Grid grid, std::size_t dim) {
    std::vector<float> data(frames * grid.size() * dim);
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] = 0.25f * static_cast<float>(i % 97) - 3.0f;
    }
    return VideoTokenStream(frames, grid, dim, std::move(data));
}

// Hand-written '<f8' file so the narrowing path is exercised against bytes numpy would produce.
void write_f8(const std::filesystem::path& path, const std::vector<std::size_t>& shape, const std::vector<double>& v) {
    std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': " + npy::shape_string(shape) + ", }";
    header.append((64 - (10 + header.size() + 1) % 64) % 64, ' ');
    header.push_back('\n');
    std::ofstream out(path, std::ios::binary);
    out.write("\x93NUMPY\x01\x00", 8);
    const char len[2] = {static_cast<char>(header.size() & 0xff), static_cast<char>(header.size() >> 8)};
    out.write(len, 2);
    out << header;
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}

}  // namespace

TEST_SUITE("core") {
    TEST_CASE("npy header is 64-byte aligned and parses back") {
        std::stringstream buf;
        const std::array<std::size_t, 2> shape = {3, 2};
        const std::vector<float> values = {1, 2, 3, 4, 5, 6};
        npy::write(buf, shape, values);
        const auto bytes = buf.str();
        CHECK(bytes.substr(0, 6) == "\x93NUMPY");
        CHECK((bytes.size() - values.size() * 4) % 64 == 0);
        const auto back = npy::read(buf);
        CHECK(back.shape == std::vector<std::size_t>{3, 2});
        CHECK(back.data == values);
    }

    TEST_CASE("npy rejects bad magic, big-endian and fortran order") {
        std::stringstream junk("not an npy file at all");
        CHECK_THROWS_AS(npy::read(junk), DataError);

        std::string header = "{'descr': '>f4', 'fortran_order': False, 'shape': (1,), }";
        std::stringstream be;
        be.write("\x93NUMPY\x01\x00", 8);
        const char len[2] = {static_cast<char>(header.size()), 0};
        be.write(len, 2);
        be << header << "abcd";
        CHECK_THROWS_WITH_AS(npy::read(be), doctest::Contains("unsupported npy dtype"), DataError);

        header = "{'descr': '<f4', 'fortran_order': True, 'shape': (1,), }";
        std::stringstream fo;
        fo.write("\x93NUMPY\x01\x00", 8);
        const char len2[2] = {static_cast<char>(header.size()), 0};
        fo.write(len2, 2);
        fo << header << "abcd";
        CHECK_THROWS_WITH_AS(npy::read(fo), doctest::Contains("fortran_order"), DataError);
    }

    TEST_CASE("npy truncated payload") {
        std::stringstream buf;
        const std::array<std::size_t, 1> shape = {4};
        const std::vector<float> values = {1, 2, 3, 4};
        npy::write(buf, shape, values);
        auto bytes = buf.str();
        bytes.resize(bytes.size() - 3);
        std::stringstream cut(bytes);
        CHECK_THROWS_WITH_AS(npy::read(cut), doctest::Contains("truncated"), DataError);
    }

    TEST_CASE("load_token_stream round-trips save_stream") {
        const auto dir = oracle::temp_dir("core");
        const auto stream = ramp_stream(2, {2, 2}, 8);
        save_stream(dir / "t.npy", stream);
        const auto back = load_token_stream(dir / "t.npy", Grid{2, 2});
        CHECK(back.frames() == 2);
        CHECK(back.tokens_per_frame() == 4);
        CHECK(back.dim() == 8);
        CHECK(back.data() == stream.data());
        // Square grids are inferred.
        CHECK(load_token_stream(dir / "t.npy").grid() == Grid{2, 2});
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("load_token_stream narrows 64-bit payloads") {
        const auto dir = oracle::temp_dir("core");
        std::vector<double> v(1 * 4 * 2);
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = 0.1 * static_cast<double>(i);
        }
        write_f8(dir / "wide.npy", {1, 4, 2}, v);
        const auto stream = load_token_stream(dir / "wide.npy", Grid{2, 2});
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(stream.data()[i] == static_cast<float>(v[i]));
        }
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("load_token_stream error paths") {
        const auto dir = oracle::temp_dir("core");
        const std::array<std::size_t, 2> rank2 = {2, 4};
        npy::write(dir / "r2.npy", rank2, std::vector<float>(8, 1.0f));
        CHECK_THROWS_WITH_AS(load_token_stream(dir / "r2.npy", Grid{2, 2}), doctest::Contains("rank 2, expected 3"),
                             DataError);

        std::vector<float> values(2 * 4 * 3, 1.0f);
        values[13] = std::numeric_limits<float>::quiet_NaN();
        const std::array<std::size_t, 3> shape = {2, 4, 3};
        npy::write(dir / "nan.npy", shape, values);
        CHECK_THROWS_WITH_AS(load_token_stream(dir / "nan.npy", Grid{2, 2}), doctest::Contains("flat offset 13"),
                             DataError);

        npy::write(dir / "ok.npy", shape, std::vector<float>(24, 1.0f));
        CHECK_THROWS_WITH_AS(load_token_stream(dir / "ok.npy", Grid{1, 3}), doctest::Contains("N_v = 4"), DataError);

        const std::array<std::size_t, 3> odd = {1, 3, 2};
        npy::write(dir / "odd.npy", odd, std::vector<float>(6, 1.0f));
        CHECK_THROWS_WITH_AS(load_token_stream(dir / "odd.npy"), doctest::Contains("perfect square"), DataError);

        CHECK_THROWS_WITH_AS(load_token_stream(dir / "missing.npy"), doctest::Contains("missing.npy"), DataError);
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("save_compressed / load_compressed is bit-exact") {
        const auto dir = oracle::temp_dir("core");
        CompressedVideo cv;
        cv.tokens = Matrix(3, 2, {1.5f, -0.0f, 3.14159274f, 1e-30f, -7.25f, 65504.0f});
        cv.provenance = {
            {{0, 1}, TokenKind::selected, {}},
            {{0, 3}, TokenKind::cluster_rep, {{0, 2}, {1, 2}, {1, 3}}},
            {{2, 0}, TokenKind::temporal_rep, {{3, 0}}},
        };
        CompressionReport report;
        report.original_count = 16;
        report.after_temporal_count = 12;
        report.final_count = 3;
        report.temporal_prune_ratio = 0.25;
        report.overall_retained_ratio = 0.15;
        report.per_video_histogram_bin = 0.25;
        report.segments = {{0, 2, 3}, {2, 4, 1}};
        report.flops = {1e13, 2.5e12, 0.25, 1e10, 2.51e12, 1.01e13, 0.2485148514851485};

        save_compressed(cv, report, dir);
        const auto back = load_compressed(dir);
        CHECK(back.video == cv);
        CHECK(back.report == report);
        CHECK(std::signbit(back.video.tokens.data[1]));

        const auto doc = read_json(dir / kReportFile);
        CHECK(doc.at("overall_retained_ratio").get<double>() == 0.15);
        for (const char* key : {"original_count", "after_temporal_count", "final_count", "temporal_prune_ratio",
                                "overall_retained_ratio", "segments", "flops", "provenance"}) {
            CHECK_MESSAGE(doc.contains(key), key);
        }
        for (const char* key : {"baseline", "prefill", "ratio"}) {
            CHECK_MESSAGE(doc.at("flops").contains(key), key);
        }
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("save_compressed with no tokens") {
        const auto dir = oracle::temp_dir("core");
        CompressedVideo cv;
        cv.tokens = Matrix(0, 5);
        save_compressed(cv, CompressionReport{}, dir);
        const auto back = load_compressed(dir);
        CHECK(back.video.tokens.rows == 0);
        CHECK(back.video.tokens.cols == 5);
        CHECK(back.video.provenance.empty());
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("validate_config defaults") {
        const auto cfg = validate_config(nlohmann::json::object());
        CHECK(cfg.tau == 0.8);
        CHECK(cfg.inner_layer_K == 18);
        CHECK(cfg.inner_ratio_R == 50.0);
        CHECK(cfg.inner_enabled);
        CHECK(cfg.temporal_merge_mode == TemporalMergeMode::mean);
        CHECK_FALSE(cfg.knn_k.has_value());
        CHECK(validate_config(nullptr) == cfg);
    }

    TEST_CASE("validate_config leaves tau alone at a 10% target") {
        const auto cfg = validate_config({{"target_ratio", 0.10}});
        CHECK(cfg.target_ratio == 0.10);
        CHECK(cfg.tau == 0.8);
    }

    TEST_CASE("validate_config range errors name the field") {
        CHECK_THROWS_WITH_AS(validate_config({{"tau", 1.5}}), doctest::Contains("'tau'"), ConfigError);
        CHECK_THROWS_WITH_AS(validate_config({{"tau", 1.5}}), doctest::Contains("[0, 1]"), ConfigError);
        CHECK_THROWS_WITH_AS(validate_config({{"target_ratio", 0.0}}), doctest::Contains("(0, 1]"), ConfigError);
        CHECK_THROWS_WITH_AS(validate_config({{"inner_ratio_R", 100}}), doctest::Contains("inner_ratio_R"),
                             ConfigError);
        CHECK_THROWS_WITH_AS(validate_config({{"knn_k", 0}}), doctest::Contains("knn_k"), ConfigError);
        CHECK_THROWS_WITH_AS(validate_config({{"temporal_merge_mode", "max"}}),
                             doctest::Contains("temporal_merge_mode"), ConfigError);
        CHECK_THROWS_WITH_AS(validate_config({{"taux", 0.5}}), doctest::Contains("unknown config field 'taux'"),
                             ConfigError);
        CHECK_THROWS_AS(validate_config({{"pooled_grid", "14by14"}}), ConfigError);
    }

    TEST_CASE("validate_config is idempotent") {
        const nlohmann::json raw = {{"tau", 0.65},          {"target_ratio", 0.1}, {"temporal_merge_mode", "first"},
                                    {"pooled_grid", "7x9"}, {"knn_k", 3},          {"inner_enabled", false},
                                    {"inner_layer_K", 60},  {"inner_ratio_R", 25.5}};
        const auto once = validate_config(raw);
        const auto twice = validate_config(to_json(once));
        CHECK(once == twice);
        CHECK(once.pooled_grid == Grid{7, 9});
        CHECK(validate_config(to_json(validate_config({}))) == validate_config({}));
    }

    TEST_CASE("parse_grid") {
        CHECK(parse_grid("14x14") == Grid{14, 14});
        CHECK(parse_grid("13X7") == Grid{13, 7});
        CHECK_THROWS(parse_grid("14"));
        CHECK_THROWS(parse_grid("0x3"));
        CHECK_THROWS(parse_grid("-2x3"));
        CHECK_THROWS(parse_grid("2x3x4"));
    }

    TEST_CASE("histogram_bin edges") {
        CHECK(histogram_bin(0.0) == 0);
        CHECK(histogram_bin(0.049) == 0);
        CHECK(histogram_bin(0.05) == 1);
        CHECK(histogram_bin(0.43) == 8);
        CHECK(histogram_bin(1.0) == kHistogramBins - 1);
    }
}
