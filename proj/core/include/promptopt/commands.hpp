#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "promptopt/types.hpp"

namespace promptopt::cli {

struct OptimizeOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

struct ResumeOptions {
    std::string trace_path;
    int from_step = 0;
    std::string method;
    int steps = 0;
    std::optional<std::string> config_path;
    std::optional<std::string> out;
};

struct AblateOptions {
    std::string trace_path;
    std::string mode;  // "pseudo" or "abo-demo"
    std::optional<std::string> config_path;
    std::optional<std::string> out;
};

struct ClusterOptions {
    std::vector<std::string> trace_paths;
    int batch_size = 5;
    std::string config_path;        // supplies the judge backend
    std::string out_prefix = "out/cluster";
};

struct AsrrOptions {
    std::string trace_path;
    std::string assignments_path;
    std::string out = "out/asrr.csv";
};

struct FollowOptions {
    std::string trace_path;
    std::vector<int> steps;
    std::vector<std::string> instructions;  // "keyword", "repeat"
    std::optional<std::string> config_path;
    std::string out = "out/following.csv";
};

struct ReportOptions {
    std::vector<std::string> trace_paths;
    std::string out = "out/curves.csv";
};

/// Each command returns the path of its primary output. Configuration and
/// usage problems raise ConfigError; runtime failures raise other Error
/// subclasses. All outputs are deterministic in (inputs, seed).
std::string cmd_optimize(const OptimizeOptions& options);
std::string cmd_resume(const ResumeOptions& options);
std::string cmd_ablate(const AblateOptions& options);
std::string cmd_cluster(const ClusterOptions& options);
std::string cmd_asrr(const AsrrOptions& options);
std::string cmd_follow(const FollowOptions& options);
std::string cmd_report(const ReportOptions& options);

}  // namespace promptopt::cli
