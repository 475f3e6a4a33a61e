// SPDX-License-Identifier: Apache-2.0

#include "tokmerge/cli.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "tokmerge/config.hpp"
#include "tokmerge/cost.hpp"
#include "tokmerge/innerllm.hpp"
#include "tokmerge/io.hpp"
#include "tokmerge/npy.hpp"
#include "tokmerge/pipeline.hpp"
#include "tokmerge/synth.hpp"

namespace tokmerge::cli {

namespace fs = std::filesystem;

namespace {

int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kData;
    }
}

bool verbose_from_env() {
    const char* v = std::getenv("TOKMERGE_VERBOSE");
    return v != nullptr && *v != '\0' && std::string(v) != "0";
}

nlohmann::json config_document(const std::string& path) {
    if (path.empty()) {
        return nlohmann::json::object();
    }
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open config " + path);
    }
    try {
        auto doc = nlohmann::json::parse(in);
        if (!doc.is_object()) {
            throw ConfigError("config " + path + " must be a JSON object");
        }
        return doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
}

std::vector<cost::ModelProfile> profiles_from(const std::string& path) {
    if (path.empty()) {
        return cost::builtin_profiles();
    }
    return cost::load_profiles(path);
}

std::optional<Grid> optional_grid(const std::string& text) {
    if (text.empty()) {
        return std::nullopt;
    }
    return parse_grid(text);
}

Grid attention_grid(const std::string& flag, std::size_t tokens, const Grid& stream_grid) {
    if (!flag.empty()) {
        const auto g = parse_grid(flag);
        if (g.size() != tokens) {
            throw DataError("attention grid " + flag + " has " + std::to_string(g.size()) + " cells but the dump has " +
                            std::to_string(tokens) + " tokens per frame");
        }
        return g;
    }
    if (tokens == stream_grid.size()) {
        return stream_grid;
    }
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(tokens))));
    if (side * side != tokens) {
        throw DataError("attention dump has " + std::to_string(tokens) +
                        " tokens per frame; pass --attn-grid HxW");
    }
    return {side, side};
}

std::optional<spatial::ImportanceMap> load_importance(const CompressArgs& args, const VideoTokenStream& stream) {
    if (!args.attn.empty() && !args.qk.empty()) {
        throw ConfigError("--attn and --qk are mutually exclusive");
    }
    if (!args.attn.empty()) {
        const auto a = npy::read(fs::path(args.attn));
        if (a.rank() != 3 || a.shape[1] != a.shape[2]) {
            throw DataError(args.attn + ": attention dump has shape " + npy::shape_string(a.shape) +
                            ", expected (B, N, N)");
        }
        if (a.shape[0] != stream.frames()) {
            throw DataError(args.attn + ": attention covers " + std::to_string(a.shape[0]) + " frames, tokens have " +
                            std::to_string(stream.frames()));
        }
        const auto grid = attention_grid(args.attn_grid, a.shape[1], stream.grid());
        return spatial::importance_from_attention(a.data, stream.frames(), grid, stream.grid());
    }
    if (!args.qk.empty()) {
        if (args.qk.size() != 2) {
            throw ConfigError("--qk takes a query and a key file");
        }
        const auto q = npy::read(fs::path(args.qk[0]));
        const auto k = npy::read(fs::path(args.qk[1]));
        if (q.rank() != 3 || q.shape != k.shape) {
            throw DataError("query/key dumps must share one (B, N, d) shape; got " + npy::shape_string(q.shape) +
                            " and " + npy::shape_string(k.shape));
        }
        if (q.shape[0] != stream.frames()) {
            throw DataError(args.qk[0] + ": covers " + std::to_string(q.shape[0]) + " frames, tokens have " +
                            std::to_string(stream.frames()));
        }
        const auto grid = attention_grid(args.attn_grid, q.shape[1], stream.grid());
        return spatial::importance_from_qk(q.data, k.data, stream.frames(), q.shape[2], grid, stream.grid());
    }
    return std::nullopt;
}

nlohmann::json inner_document(const innerllm::InnerMergeResult& r) {
    return {{"retained_indices", r.retained_indices},
            {"candidates", r.candidates},
            {"assignment", r.assignment},
            {"retained_count", r.retained_indices.size()},
            {"merged_count", r.candidates.size()}};
}

void write_inner(const innerllm::InnerMergeResult& r, const fs::path& dir) {
    const std::array<std::size_t, 2> shape = {r.updated.rows, r.updated.cols};
    npy::write(dir / "inner_tokens.npy", shape, r.updated.data);
    write_json(dir / "inner.json", inner_document(r));
}

std::vector<synth::PlantedSegment> parse_segments(const std::string& text, std::size_t frames) {
    if (text.empty()) {
        return {{frames, 0.5}};
    }
    std::vector<synth::PlantedSegment> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw ConfigError("segment '" + item + "' must look like LENGTH:FRACTION");
        }
        try {
            out.push_back({static_cast<std::size_t>(std::stoul(item.substr(0, colon))),
                           std::stod(item.substr(colon + 1))});
        } catch (const std::exception&) {
            throw ConfigError("segment '" + item + "' must look like LENGTH:FRACTION");
        }
    }
    return out;
}

std::vector<fs::path> collect_reports(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw DataError(dir.string() + " is not a directory");
    }
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            paths.push_back(entry.path());
        } else if (entry.is_directory() && fs::is_regular_file(entry.path() / kReportFile)) {
            paths.push_back(entry.path() / kReportFile);
        }
    }
    std::ranges::sort(paths);
    return paths;
}

std::string fixed2(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

}  // namespace

int cmd_compress(const CompressArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto doc = config_document(args.config);
        if (args.tau) {
            doc["tau"] = *args.tau;
        }
        if (args.target_ratio) {
            doc["target_ratio"] = *args.target_ratio;
        }
        if (!args.merge_mode.empty()) {
            doc["temporal_merge_mode"] = args.merge_mode;
        }
        const auto cfg = validate_config(doc);
        if (args.hidden.empty() != args.last_attn.empty()) {
            throw ConfigError("--hidden and --last-attn must be given together");
        }
        const auto profiles = profiles_from(args.profiles);
        const auto& profile = cost::find_profile(profiles, args.profile);

        const auto stream = load_token_stream(args.tokens, optional_grid(args.grid));
        const auto importance = load_importance(args, stream);
        auto result = run_pipeline(stream, importance ? &*importance : nullptr, cfg, profile);

        const fs::path out_dir(args.out);
        save_compressed(result.compressed, result.report, out_dir);

        auto summary = to_json(result.report);
        if (!args.hidden.empty()) {
            if (cfg.inner_enabled) {
                const auto t0 = std::chrono::steady_clock::now();
                const auto hidden = load_matrix(args.hidden);
                const auto last = load_vector(args.last_attn);
                const auto inner = innerllm::inner_merge(hidden, last, cfg.inner_ratio_R);
                write_inner(inner, out_dir);
                result.timings.inner_ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
                summary["inner"] = {{"retained_count", inner.retained_indices.size()},
                                    {"merged_count", inner.candidates.size()}};
            } else {
                err << "note: inner merging disabled in config; --hidden/--last-attn ignored\n";
            }
        }
        if (args.verbose || verbose_from_env()) {
            err << "temporal " << result.timings.temporal_ms << " ms, spatial " << result.timings.spatial_ms
                << " ms, inner " << result.timings.inner_ms << " ms\n";
        }
        out << summary.dump(2) << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_segment(const SegmentArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto doc = config_document(args.config);
        if (args.tau) {
            doc["tau"] = *args.tau;
        }
        const auto cfg = validate_config(doc);
        const auto stream = load_token_stream(args.tokens, optional_grid(args.grid));
        const auto mask = temporal::pairwise_redundancy(stream, cfg.tau);
        const auto plan = temporal::optimal_segmentation(mask);
        auto segments = nlohmann::json::array();
        for (std::size_t s = 0; s < plan.gains.size(); ++s) {
            segments.push_back(
                {{"start", plan.boundaries[s]}, {"end", plan.boundaries[s + 1]}, {"gain", plan.gains[s]}});
        }
        const nlohmann::json result = {{"tau", cfg.tau},
                                       {"frames", stream.frames()},
                                       {"tokens_per_frame", stream.tokens_per_frame()},
                                       {"boundaries", plan.boundaries},
                                       {"segments", segments},
                                       {"total_gain", plan.total_gain}};
        out << result.dump(2) << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_flops(const FlopsArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto doc = config_document(args.config);
        if (args.layer_k) {
            doc["inner_layer_K"] = *args.layer_k;
        }
        if (args.ratio_r) {
            doc["inner_ratio_R"] = *args.ratio_r;
        }
        if (args.no_inner) {
            doc["inner_enabled"] = false;
        }
        const auto cfg = validate_config(doc);
        const auto profiles = profiles_from(args.profiles);
        const auto& profile = cost::find_profile(profiles, args.profile);
        if (args.retained && args.target_ratio) {
            throw ConfigError("--retained and --target-ratio are mutually exclusive");
        }
        const auto ratio = args.target_ratio.value_or(1.0);
        const auto retained = args.retained ? *args.retained : cost::retained_tokens_for_ratio(profile, ratio);
        const auto report = cost::pipeline_cost_report(profile, cfg, retained);
        auto result = cost::to_json(report);
        result["profile"] = profile.name;
        result["retained_tokens"] = retained;
        result["inner_enabled"] = cfg.inner_enabled;
        result["inner_layer_K"] = cfg.inner_layer_K;
        result["inner_ratio_R"] = cfg.inner_ratio_R;
        out << result.dump(2) << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        std::array<std::size_t, kHistogramBins> counts{};
        double prune_sum = 0.0;
        double retained_sum = 0.0;
        std::size_t n = 0;
        for (const auto& path : collect_reports(args.reports)) {
            const auto doc = read_json(path);
            if (!doc.is_object() || !doc.contains("temporal_prune_ratio")) {
                continue;
            }
            const auto report = report_from_json(doc);
            ++counts[histogram_bin(report.temporal_prune_ratio)];
            prune_sum += report.temporal_prune_ratio;
            retained_sum += report.overall_retained_ratio;
            ++n;
        }
        if (n == 0) {
            throw DataError("no per-video reports found in " + args.reports);
        }

        std::ostringstream csv;
        csv << "bin_low,bin_high,count\n";
        for (std::size_t b = 0; b < kHistogramBins; ++b) {
            csv << fixed2(static_cast<double>(b) / kHistogramBins) << ','
                << fixed2(static_cast<double>(b + 1) / kHistogramBins) << ',' << counts[b] << '\n';
        }
        const nlohmann::json summary = {{"videos", n},
                                        {"mean_temporal_prune_ratio", prune_sum / static_cast<double>(n)},
                                        {"mean_overall_retained_ratio", retained_sum / static_cast<double>(n)},
                                        {"histogram", counts}};
        if (!args.out.empty()) {
            fs::create_directories(args.out);
            std::ofstream f(fs::path(args.out) / "histogram.csv", std::ios::trunc);
            f << csv.str();
            if (!f) {
                throw DataError("failed writing " + (fs::path(args.out) / "histogram.csv").string());
            }
            write_json(fs::path(args.out) / "summary.json", summary);
        } else {
            out << csv.str();
        }
        out << summary.dump(2) << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        synth::SynthSpec spec;
        spec.frames = args.frames;
        spec.grid = parse_grid(args.grid);
        spec.dim = args.dim;
        spec.segments = parse_segments(args.segments, args.frames);
        spec.noise_sigma = args.noise;
        spec.seed = args.seed;
        const auto generated = synth::generate(spec);

        const fs::path dir(args.out);
        fs::create_directories(dir);
        save_stream(dir / "tokens.npy", generated.stream);

        const auto& truth = generated.ground_truth;
        std::vector<float> mask(truth.rows() * truth.cols());
        for (std::size_t m = 0; m < truth.rows(); ++m) {
            for (std::size_t k = 0; k < truth.cols(); ++k) {
                mask[m * truth.cols() + k] = truth.test(m, k) ? 1.0f : 0.0f;
            }
        }
        const std::array<std::size_t, 2> mask_shape = {truth.rows(), truth.cols()};
        npy::write(dir / "ground_truth.npy", mask_shape, mask);

        if (args.attn_dim > 0) {
            const auto n = spec.grid.size();
            const auto attn = synth::random_attention(spec.frames, n, args.attn_dim, spec.seed ^ 0xa77e57ULL);
            const std::array<std::size_t, 3> shape = {spec.frames, n, n};
            npy::write(dir / "attention.npy", shape, attn);
        }

        auto segments = nlohmann::json::array();
        for (const auto& s : spec.segments) {
            segments.push_back({{"length", s.length}, {"redundant_fraction", s.redundant_fraction}});
        }
        const nlohmann::json doc = {{"frames", spec.frames},
                                    {"grid", to_string(spec.grid)},
                                    {"dim", spec.dim},
                                    {"noise_sigma", spec.noise_sigma},
                                    {"seed", spec.seed},
                                    {"segments", segments},
                                    {"boundaries", generated.boundaries},
                                    {"planted_slots", generated.planted_slots},
                                    {"expected_gain", generated.expected_gain}};
        write_json(dir / "truth.json", doc);
        out << "wrote " << (dir / "tokens.npy").string() << " (" << spec.frames << "x" << spec.grid.size() << "x"
            << spec.dim << "), expected gain " << generated.expected_gain << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_inner(const InnerArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto hidden = load_matrix(args.hidden);
        const auto last = load_vector(args.last_attn);
        const auto result = innerllm::inner_merge(hidden, last, args.ratio_r);
        if (!args.out.empty()) {
            fs::create_directories(args.out);
            write_inner(result, args.out);
        }
        out << inner_document(result).dump(2) << '\n';
        return static_cast<int>(kOk);
    });
}

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Video token compression: temporal segmentation, spatial merging, inner-LLM merging, FLOPs model"};
    app.require_subcommand(1);
    app.name(argv.empty() ? "tokmerge" : argv.front());

    CompressArgs compress;
    auto* c = app.add_subcommand("compress", "Run the temporal + spatial (+ inner) compression pipeline");
    c->add_option("--tokens", compress.tokens, "Token file (B, N_v, d) .npy")->required();
    c->add_option("--grid", compress.grid, "Token grid HxW (default: square)");
    c->add_option("--config", compress.config, "Compression config JSON");
    c->add_option("--attn", compress.attn, "Attention dump (B, N, N) .npy");
    c->add_option("--attn-grid", compress.attn_grid, "Encoder grid of the attention dump HxW");
    c->add_option("--qk", compress.qk, "Query and key dumps (B, N, d) .npy")->expected(2);
    c->add_option("--hidden", compress.hidden, "Layer-K vision hidden states (N, d) .npy");
    c->add_option("--last-attn", compress.last_attn, "Last-token attention row (N,) .npy");
    c->add_option("--out", compress.out, "Output directory")->required();
    c->add_option("--tau", compress.tau, "Temporal similarity threshold");
    c->add_option("--target-ratio", compress.target_ratio, "Before-LLM retained ratio");
    c->add_option("--merge-mode", compress.merge_mode, "Temporal merge mode: mean|first");
    c->add_option("--profile", compress.profile, "Model profile for the cost report");
    c->add_option("--profiles", compress.profiles, "Profiles JSON (default: built-in)");
    c->add_flag("-v,--verbose", compress.verbose, "Print stage timings to stderr");

    SegmentArgs segment;
    auto* s = app.add_subcommand("segment", "Print the optimal temporal segmentation");
    s->add_option("--tokens", segment.tokens, "Token file (B, N_v, d) .npy")->required();
    s->add_option("--grid", segment.grid, "Token grid HxW");
    s->add_option("--config", segment.config, "Compression config JSON");
    s->add_option("--tau", segment.tau, "Temporal similarity threshold");

    FlopsArgs flops;
    auto* f = app.add_subcommand("flops", "Evaluate the prefill/decode FLOPs model");
    f->add_option("--profile", flops.profile, "Model profile name");
    f->add_option("--profiles", flops.profiles, "Profiles JSON (default: built-in)");
    f->add_option("--config", flops.config, "Compression config JSON");
    f->add_option("--target-ratio", flops.target_ratio, "Before-LLM retained ratio (default 1.0)");
    f->add_option("--retained", flops.retained, "Explicit retained vision-token count");
    f->add_option("--layer-k", flops.layer_k, "Inner merge layer K");
    f->add_option("--ratio-r", flops.ratio_r, "Inner merge ratio R (percent)");
    f->add_flag("--no-inner", flops.no_inner, "Disable inner-LLM merging");

    ReportArgs report;
    auto* r = app.add_subcommand("report", "Aggregate per-video reports into a temporal pruning histogram");
    r->add_option("--reports", report.reports, "Directory of report JSON files")->required();
    r->add_option("--out", report.out, "Write histogram.csv and summary.json here");

    SynthArgs synth_args;
    auto* y = app.add_subcommand("synth", "Generate a synthetic token stream with planted redundancy");
    y->add_option("--out", synth_args.out, "Output directory")->required();
    y->add_option("--frames", synth_args.frames, "B");
    y->add_option("--grid", synth_args.grid, "Token grid HxW");
    y->add_option("--dim", synth_args.dim, "Embedding width d");
    y->add_option("--segments", synth_args.segments, "LENGTH:FRACTION,... (default B:0.5)");
    y->add_option("--noise", synth_args.noise, "Noise sigma on planted repeats");
    y->add_option("--seed", synth_args.seed, "PRNG seed");
    y->add_option("--attn-dim", synth_args.attn_dim, "Also write attention.npy from random q/k of this width");

    InnerArgs inner;
    auto* i = app.add_subcommand("inner", "Run the inner-LLM merge on dumped layer states");
    i->add_option("--hidden", inner.hidden, "Hidden states (N, d) .npy")->required();
    i->add_option("--last-attn", inner.last_attn, "Last-token attention row (N,) .npy")->required();
    i->add_option("--ratio-r", inner.ratio_r, "Merge ratio R (percent)");
    i->add_option("--out", inner.out, "Output directory");

    std::vector<const char*> raw;
    raw.reserve(argv.size() + 1);
    if (argv.empty()) {
        raw.push_back("tokmerge");
    }
    for (const auto& a : argv) {
        raw.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(raw.size()), raw.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? static_cast<int>(kOk) : static_cast<int>(kUsage);
    }

    if (c->parsed()) {
        return cmd_compress(compress, out, err);
    }
    if (s->parsed()) {
        return cmd_segment(segment, out, err);
    }
    if (f->parsed()) {
        return cmd_flops(flops, out, err);
    }
    if (r->parsed()) {
        return cmd_report(report, out, err);
    }
    if (y->parsed()) {
        return cmd_synth(synth_args, out, err);
    }
    return cmd_inner(inner, out, err);
}

}  // namespace tokmerge::cli
