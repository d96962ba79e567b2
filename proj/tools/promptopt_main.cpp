#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "promptopt/commands.hpp"
#include "promptopt/errors.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LLM prompt-optimization workbench"};
    app.require_subcommand(1);

    promptopt::cli::OptimizeOptions optimize;
    std::uint64_t seed_value = 0;
    auto* optimize_cmd = app.add_subcommand("optimize", "Run one optimization");
    optimize_cmd->add_option("--config", optimize.config_path, "Run configuration file")
        ->required();
    auto* seed_opt = optimize_cmd->add_option("--seed", seed_value, "Override the run seed");
    std::string optimize_out;
    auto* optimize_out_opt = optimize_cmd->add_option("--out", optimize_out, "Trace output path");

    promptopt::cli::ResumeOptions resume;
    auto* resume_cmd =
        app.add_subcommand("resume", "Continue a trace with a different updater");
    resume_cmd->add_option("--trace", resume.trace_path, "Source trace")->required();
    resume_cmd->add_option("--from-step", resume.from_step, "Seam step in the source trace")
        ->required();
    resume_cmd->add_option("--method", resume.method, "Updater for the resumed run")
        ->required();
    resume_cmd->add_option("--steps", resume.steps, "Steps to run after the seam")
        ->required();
    std::string resume_config;
    auto* resume_config_opt =
        resume_cmd->add_option("--config", resume_config, "Override the embedded config");
    std::string resume_out;
    auto* resume_out_opt = resume_cmd->add_option("--out", resume_out, "Trace output path");

    promptopt::cli::AblateOptions ablate;
    auto* ablate_cmd = app.add_subcommand("ablate", "Pseudo-error or demo ablation");
    ablate_cmd->add_option("--trace", ablate.trace_path, "Source trace")->required();
    ablate_cmd->add_option("--mode", ablate.mode, "pseudo or abo-demo")->required();
    std::string ablate_config;
    auto* ablate_config_opt =
        ablate_cmd->add_option("--config", ablate_config, "Override the embedded config");
    std::string ablate_out;
    auto* ablate_out_opt = ablate_cmd->add_option("--out", ablate_out, "Output path");

    promptopt::cli::ClusterOptions cluster;
    auto* cluster_cmd = app.add_subcommand("cluster", "Cluster feedbacks with a judge");
    cluster_cmd->add_option("--trace", cluster.trace_paths, "Trace files")
        ->required()
        ->expected(-1);
    cluster_cmd->add_option("--batch-size", cluster.batch_size, "Feedbacks per judge call");
    cluster_cmd->add_option("--config", cluster.config_path, "Config carrying the judge")
        ->required();
    cluster_cmd->add_option("--out", cluster.out_prefix, "Output prefix");

    promptopt::cli::AsrrOptions asrr;
    auto* asrr_cmd = app.add_subcommand("asrr", "Per-step feedback repetition rate");
    asrr_cmd->add_option("--trace", asrr.trace_path, "Trace file")->required();
    asrr_cmd->add_option("--assignments", asrr.assignments_path,
                         "Assignments from the cluster command")
        ->required();
    asrr_cmd->add_option("--out", asrr.out, "Output CSV");

    promptopt::cli::FollowOptions follow;
    auto* follow_cmd =
        app.add_subcommand("follow", "Verifiable-instruction following metrics");
    follow_cmd->add_option("--trace", follow.trace_path, "Trace file")->required();
    follow_cmd->add_option("--steps", follow.steps, "Steps to analyze")->expected(-1);
    follow_cmd
        ->add_option("--instructions", follow.instructions, "keyword and/or repeat")
        ->expected(-1);
    std::string follow_config;
    auto* follow_config_opt =
        follow_cmd->add_option("--config", follow_config, "Override the embedded config");
    follow_cmd->add_option("--out", follow.out, "Output CSV");

    promptopt::cli::ReportOptions report;
    auto* report_cmd = app.add_subcommand("report", "Max-test-score curves as CSV");
    report_cmd->add_option("--trace", report.trace_paths, "Trace files")
        ->required()
        ->expected(-1);
    report_cmd->add_option("--out", report.out, "Output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
    }

    try {
        std::string out;
        if (*optimize_cmd) {
            if (*seed_opt) {
                optimize.seed = seed_value;
            }
            if (*optimize_out_opt) {
                optimize.out = optimize_out;
            }
            out = promptopt::cli::cmd_optimize(optimize);
        } else if (*resume_cmd) {
            if (*resume_config_opt) {
                resume.config_path = resume_config;
            }
            if (*resume_out_opt) {
                resume.out = resume_out;
            }
            out = promptopt::cli::cmd_resume(resume);
        } else if (*ablate_cmd) {
            if (*ablate_config_opt) {
                ablate.config_path = ablate_config;
            }
            if (*ablate_out_opt) {
                ablate.out = ablate_out;
            }
            out = promptopt::cli::cmd_ablate(ablate);
        } else if (*cluster_cmd) {
            out = promptopt::cli::cmd_cluster(cluster);
        } else if (*asrr_cmd) {
            out = promptopt::cli::cmd_asrr(asrr);
        } else if (*follow_cmd) {
            out = promptopt::cli::cmd_follow(follow);
        } else if (*report_cmd) {
            out = promptopt::cli::cmd_report(report);
        }
        std::cout << out << "\n";
        return kExitOk;
    } catch (const promptopt::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const promptopt::RunAborted& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
