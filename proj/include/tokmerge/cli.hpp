// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tokmerge::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2 };

struct CompressArgs {
    std::string tokens;
    std::string grid;
    std::string config;
    std::string attn;
    std::string attn_grid;
    std::vector<std::string> qk;
    std::string hidden;
    std::string last_attn;
    std::string out;
    std::optional<double> tau;
    std::optional<double> target_ratio;
    std::string merge_mode;
    std::string profile = "llava-ov-7b";
    std::string profiles;
    bool verbose = false;
};

struct SegmentArgs {
    std::string tokens;
    std::string grid;
    std::string config;
    std::optional<double> tau;
};

struct FlopsArgs {
    std::string profile = "llava-ov-7b";
    std::string profiles;
    std::string config;
    std::optional<double> target_ratio;
    std::optional<std::uint64_t> retained;
    std::optional<std::size_t> layer_k;
    std::optional<double> ratio_r;
    bool no_inner = false;
};

struct ReportArgs {
    std::string reports;
    std::string out;
};

struct SynthArgs {
    std::string out;
    std::size_t frames = 32;
    std::string grid = "14x14";
    std::size_t dim = 128;
    std::string segments;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::size_t attn_dim = 0;
};

struct InnerArgs {
    std::string hidden;
    std::string last_attn;
    std::string out;
    double ratio_r = 50.0;
};

int cmd_compress(const CompressArgs& args, std::ostream& out, std::ostream& err);
int cmd_segment(const SegmentArgs& args, std::ostream& out, std::ostream& err);
int cmd_flops(const FlopsArgs& args, std::ostream& out, std::ostream& err);
int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err);
int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err);
int cmd_inner(const InnerArgs& args, std::ostream& out, std::ostream& err);

/// Parses `argv` (argv[0] is the program name) and dispatches to a subcommand.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace tokmerge::cli
