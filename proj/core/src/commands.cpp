#include "promptopt/commands.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "promptopt/analysis.hpp"
#include "promptopt/config.hpp"
#include "promptopt/csv.hpp"
#include "promptopt/errors.hpp"
#include "promptopt/following.hpp"
#include "promptopt/search.hpp"
#include "promptopt/trace_io.hpp"

namespace promptopt::cli {

using nlohmann::json;

namespace {

struct Session {
    RunConfig config;
    LoadedTask task;
    TemplateLibrary templates;
    std::shared_ptr<Backend> optimizer;
    std::shared_ptr<Backend> target;
    std::shared_ptr<Backend> judge;
    std::shared_ptr<TranscriptLog> transcript;
};

Session open_session(const RunConfig& config) {
    Session s{config, load_dataset(config.manifest), TemplateLibrary::load_default(),
              nullptr, nullptr, nullptr, nullptr};
    s.optimizer = make_backend(config.optimizer);
    s.target = make_backend(config.target);
    if (config.judge) {
        s.judge = make_backend(*config.judge);
    }
    if (config.transcript) {
        s.transcript = std::make_shared<TranscriptLog>(*config.transcript);
        s.optimizer->set_transcript(s.transcript);
        s.target->set_transcript(s.transcript);
        if (s.judge) {
            s.judge->set_transcript(s.transcript);
        }
    }
    return s;
}

RunConfig config_for_trace(const std::optional<std::string>& config_path,
                           const json& embedded,
                           const std::filesystem::path& trace_path) {
    if (config_path) {
        return load_run_config(*config_path);
    }
    if (embedded.is_null()) {
        throw ConfigError(fmt::format(
            "trace {} carries no embedded config; pass --config", trace_path.string()));
    }
    return run_config_from_json(embedded, trace_path.parent_path());
}

RunInputs make_inputs(Session& session, const BeamConfig& beam, Method method,
                      const std::string& run_id, bool pseudo) {
    RunInputs inputs;
    inputs.config = beam;
    inputs.method = method;
    inputs.dataset = &session.task.dataset;
    inputs.schema = &session.task.schema;
    inputs.optimizer = session.optimizer.get();
    inputs.target = session.target.get();
    inputs.templates = &session.templates;
    inputs.run_id = run_id;
    inputs.pseudo_reflection = pseudo;
    inputs.test_best_only = session.config.test_best_only;
    return inputs;
}

std::filesystem::path trace_path_for(const RunConfig& config,
                                     const std::optional<std::string>& out,
                                     const std::string& run_id) {
    if (out) {
        return *out;
    }
    return std::filesystem::path(config.out_dir) / (run_id + ".jsonl");
}

struct BestPrompt {
    std::string prompt_id;
    double accuracy = -1.0;
    int step = 0;
    std::string text;
};

json best_to_json(const BestPrompt& best) {
    return json{{"prompt_id", best.prompt_id},
                {"accuracy", best.accuracy},
                {"step", best.step},
                {"text", best.text}};
}

json summarize(const RunTrace& trace) {
    std::map<std::string, const Prompt*> prompts;
    for (const auto& rec : trace.steps) {
        for (const auto& p : rec.candidates) {
            prompts.emplace(p.id, &p);
        }
    }
    auto best_of = [&](bool test) {
        BestPrompt best;
        for (const auto& rec : trace.steps) {
            for (const auto& s : test ? rec.test_scores : rec.train_scores) {
                if (s.accuracy > best.accuracy) {
                    best = BestPrompt{s.prompt_id, s.accuracy, rec.step,
                                      prompts.count(s.prompt_id)
                                          ? prompts.at(s.prompt_id)->full_text()
                                          : ""};
                }
            }
        }
        return best;
    };
    json summary{{"run_id", trace.run_id},
                 {"task", trace.task_name},
                 {"method", to_string(trace.method)},
                 {"steps", trace.steps.size()},
                 {"best_train", best_to_json(best_of(false))},
                 {"best_test", best_to_json(best_of(true))},
                 {"max_test_score_curve", max_test_score_curve(trace)}};
    if (trace.seam) {
        summary["seam"] = json{{"source_run_id", trace.seam->source_run_id},
                               {"from_step", trace.seam->from_step}};
    }
    return summary;
}

void write_summary(const std::filesystem::path& trace_path, const RunTrace& trace) {
    std::filesystem::path path = trace_path;
    path += ".summary.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << summarize(trace).dump(1) << "\n";
}

std::string run_and_persist(Session& session, const RunInputs& inputs,
                            const std::filesystem::path& path) {
    RunTrace meta;
    meta.run_id = inputs.run_id;
    meta.task_name = session.task.dataset.name;
    meta.method = inputs.method;
    meta.config = inputs.config;
    meta.pseudo_reflection = inputs.pseudo_reflection;
    TraceWriter writer(path, trace_header(meta, session.config.raw));
    const RunTrace trace = run(inputs, &writer);
    write_summary(path, trace);
    return path.string();
}

}  // namespace

std::string cmd_optimize(const OptimizeOptions& options) {
    RunConfig config = load_run_config(options.config_path);
    if (options.seed) {
        config.beam.seed = *options.seed;
        config.raw["seed"] = *options.seed;
    }
    Session session = open_session(config);
    std::string run_id = fmt::format("{}-{}-seed{}", to_string(config.method),
                                     session.task.dataset.name, config.beam.seed);
    if (config.pseudo) {
        run_id += "-pseudo";
    }
    const RunInputs inputs =
        make_inputs(session, config.beam, config.method, run_id, config.pseudo);
    return run_and_persist(session, inputs,
                           trace_path_for(config, options.out, run_id));
}

std::string cmd_resume(const ResumeOptions& options) {
    const Method method = method_from_string(options.method);
    if (options.steps < 1) {
        throw ConfigError("resume: steps must be >= 1");
    }
    LoadedTrace loaded = read_trace(options.trace_path);
    RunConfig config = config_for_trace(options.config_path, loaded.run_config,
                                        options.trace_path);
    Session session = open_session(config);

    const std::string run_id = fmt::format("{}+s{}-{}", loaded.trace.run_id,
                                           options.from_step, to_string(method));
    RunInputs inputs = make_inputs(session, loaded.trace.config, method, run_id,
                                   config.pseudo);

    RunTrace meta;
    meta.run_id = run_id;
    meta.task_name = loaded.trace.task_name;
    meta.method = method;
    meta.config = loaded.trace.config;
    meta.config.total_steps = options.steps;
    meta.seam = RunSeam{loaded.trace.run_id, options.from_step};
    const std::filesystem::path path =
        trace_path_for(config, options.out, run_id);
    TraceWriter writer(path, trace_header(meta, config.raw));
    const RunTrace trace = resume_with(loaded.trace, options.from_step, method,
                                       options.steps, inputs, &writer);
    write_summary(path, trace);
    return path.string();
}

namespace {

std::string ablate_pseudo(const AblateOptions& options, LoadedTrace& loaded,
                          RunConfig& config) {
    if (!is_reflective(loaded.trace.method)) {
        throw ConfigError(fmt::format(
            "prediction flipping needs a reflection-based trace, got \"{}\"",
            to_string(loaded.trace.method)));
    }
    config.pseudo = true;
    config.raw["pseudo"] = true;
    Session session = open_session(config);
    const std::string run_id = loaded.trace.run_id + "-pseudo";
    const RunInputs inputs = make_inputs(session, loaded.trace.config,
                                         loaded.trace.method, run_id, true);
    const std::filesystem::path path =
        trace_path_for(config, options.out, run_id);
    const std::string written = run_and_persist(session, inputs, path);

    // side-by-side report of the two reflection settings
    const RunTrace pseudo = read_trace(written).trace;
    json report{{"source_run_id", loaded.trace.run_id},
                {"pseudo_run_id", pseudo.run_id},
                {"source_curve", max_test_score_curve(loaded.trace)},
                {"pseudo_curve", max_test_score_curve(pseudo)}};
    std::filesystem::path report_path = path;
    report_path += ".report.json";
    std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
    out << report.dump(1) << "\n";
    return written;
}

std::string ablate_demo(const AblateOptions& options, LoadedTrace& loaded,
                        RunConfig& config) {
    if (loaded.trace.method != Method::kAbo) {
        throw ConfigError("demo ablation applies to behavior-optimization traces");
    }
    Session session = open_session(config);
    std::map<std::string, const Prompt*> prompts;
    for (const auto& rec : loaded.trace.steps) {
        for (const auto& p : rec.candidates) {
            prompts.emplace(p.id, &p);
        }
    }
    const ScoredPrompt* best = nullptr;
    for (const auto& rec : loaded.trace.steps) {
        for (const auto& s : rec.test_scores) {
            if (best == nullptr || s.accuracy > best->accuracy) {
                best = &s;
            }
        }
    }
    if (best == nullptr || !prompts.count(best->prompt_id)) {
        throw TraceError("trace carries no test-scored prompts");
    }
    const Prompt& original = *prompts.at(best->prompt_id);
    const Prompt ablated = abo_ablate(original);
    const ScoredPrompt rescored = evaluate_prompt(
        ablated, session.task.dataset, Split::kTest, *session.target,
        session.task.schema);

    const std::filesystem::path path =
        options.out ? std::filesystem::path(*options.out)
                    : std::filesystem::path(config.out_dir) /
                          (loaded.trace.run_id + "-demo-ablation.csv");
    write_csv(path, {{"prompt_id", "variant", "test_accuracy"},
                     {original.id, "original", format_metric(best->accuracy)},
                     {ablated.id, "ablated", format_metric(rescored.accuracy)}});
    return path.string();
}

}  // namespace

std::string cmd_ablate(const AblateOptions& options) {
    LoadedTrace loaded = read_trace(options.trace_path);
    RunConfig config = config_for_trace(options.config_path, loaded.run_config,
                                        options.trace_path);
    if (options.mode == "pseudo") {
        return ablate_pseudo(options, loaded, config);
    }
    if (options.mode == "abo-demo") {
        return ablate_demo(options, loaded, config);
    }
    throw ConfigError(fmt::format("unknown ablation mode \"{}\"", options.mode));
}

std::string cmd_cluster(const ClusterOptions& options) {
    if (options.trace_paths.empty()) {
        throw ConfigError("cluster: at least one trace required");
    }
    RunConfig config = load_run_config(options.config_path);
    if (!config.judge) {
        throw ConfigError("judge: required for clustering");
    }
    auto judge = make_backend(*config.judge);
    TemplateLibrary templates = TemplateLibrary::load_default();

    std::vector<Feedback> feedbacks;
    for (const auto& path : options.trace_paths) {
        const LoadedTrace loaded = read_trace(path);
        for (const auto& rec : loaded.trace.steps) {
            for (Feedback f : rec.feedbacks) {
                if (f.source.empty()) {
                    f.source = loaded.trace.run_id;
                }
                feedbacks.push_back(std::move(f));
            }
        }
    }
    if (feedbacks.empty()) {
        throw TraceError("no feedbacks found in the given traces");
    }
    const ClusterRun result =
        cluster_feedbacks(feedbacks, options.batch_size, *judge, templates);

    const std::filesystem::path prefix(options.out_prefix);
    if (prefix.has_parent_path()) {
        std::filesystem::create_directories(prefix.parent_path());
    }

    json catalog = json::array();
    for (const auto& c : result.catalog.clusters()) {
        catalog.push_back({{"id", c.id}, {"description", c.description}});
    }
    std::ofstream(prefix.string() + ".catalog.json") << catalog.dump(1) << "\n";

    json assignments = json::array();
    for (const auto& a : result.assignments) {
        assignments.push_back({{"feedback_id", a.feedback_id},
                               {"cluster_id", a.cluster_id},
                               {"source", a.source}});
    }
    json assignment_doc{{"assignments", std::move(assignments)},
                        {"unassigned", result.unassigned}};
    std::ofstream(prefix.string() + ".assignments.json")
        << assignment_doc.dump(1) << "\n";

    std::vector<std::vector<std::string>> rows{{"source", "cluster", "proportion"}};
    for (const auto& row : distribution(result.assignments, result.catalog)) {
        rows.push_back({row.source, row.cluster, format_metric(row.proportion)});
    }
    const std::string csv_path = prefix.string() + ".distribution.csv";
    write_csv(csv_path, rows);
    return csv_path;
}

std::string cmd_asrr(const AsrrOptions& options) {
    const LoadedTrace loaded = read_trace(options.trace_path);
    std::ifstream in(options.assignments_path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open assignments {}",
                                      options.assignments_path));
    }
    json doc;
    in >> doc;
    std::vector<Assignment> assignments;
    for (const auto& a : doc.at("assignments")) {
        assignments.push_back(Assignment{a.at("feedback_id").get<std::string>(),
                                         a.at("cluster_id").get<std::string>(),
                                         a.value("source", "")});
    }

    std::vector<std::vector<std::string>> rows{{"step", "asrr"}};
    for (std::size_t t = 1; t < loaded.trace.steps.size(); ++t) {
        const auto value = asrr(loaded.trace, assignments, static_cast<int>(t));
        rows.push_back({std::to_string(t),
                        value ? format_metric(*value) : std::string()});
    }
    write_csv(options.out, rows);
    return options.out;
}

std::string cmd_follow(const FollowOptions& options) {
    if (options.steps.empty()) {
        throw ConfigError("follow: at least one step required");
    }
    if (options.instructions.empty()) {
        throw ConfigError("follow: at least one instruction required");
    }
    LoadedTrace loaded = read_trace(options.trace_path);
    RunConfig config = config_for_trace(options.config_path, loaded.run_config,
                                        options.trace_path);
    Session session = open_session(config);

    std::map<std::string, const Prompt*> prompts;
    for (const auto& rec : loaded.trace.steps) {
        for (const auto& p : rec.candidates) {
            prompts.emplace(p.id, &p);
        }
    }

    std::vector<std::vector<std::string>> rows{
        {"step", "instruction", "afr", "ffer", "fer"}};
    for (int step : options.steps) {
        if (step < 0 || step >= static_cast<int>(loaded.trace.steps.size())) {
            throw ConfigError(fmt::format("follow: step {} outside trace", step));
        }
        std::vector<Prompt> step_prompts;
        for (const auto& id : loaded.trace.steps[step].selected) {
            if (!prompts.count(id)) {
                throw TraceError(fmt::format("selected prompt {} missing from trace", id));
            }
            step_prompts.push_back(*prompts.at(id));
        }

        double afr_sum = 0.0;
        std::vector<double> ffers;
        std::vector<double> fers;
        for (const auto& name : options.instructions) {
            const VerifiableInstruction instruction = instruction_from_name(name);
            const FollowingRun result = following_metrics(
                step_prompts, session.task.dataset, session.task.schema, instruction,
                *session.target, *session.optimizer, session.templates,
                config.keyword_case_sensitive);
            rows.push_back(
                {std::to_string(step), name, format_metric(result.metrics.afr),
                 result.metrics.ffer ? format_metric(*result.metrics.ffer) : "",
                 result.metrics.fer ? format_metric(*result.metrics.fer) : ""});
            afr_sum += result.metrics.afr;
            if (result.metrics.ffer) {
                ffers.push_back(*result.metrics.ffer);
            }
            if (result.metrics.fer) {
                fers.push_back(*result.metrics.fer);
            }
        }
        if (options.instructions.size() > 1) {
            auto mean = [](const std::vector<double>& v) {
                double sum = 0.0;
                for (double x : v) {
                    sum += x;
                }
                return sum / static_cast<double>(v.size());
            };
            rows.push_back(
                {std::to_string(step), "average",
                 format_metric(afr_sum /
                               static_cast<double>(options.instructions.size())),
                 ffers.empty() ? "" : format_metric(mean(ffers)),
                 fers.empty() ? "" : format_metric(mean(fers))});
        }
    }
    write_csv(options.out, rows);
    return options.out;
}

std::string cmd_report(const ReportOptions& options) {
    if (options.trace_paths.empty()) {
        throw ConfigError("report: at least one trace required");
    }
    std::vector<std::string> labels;
    std::vector<std::vector<double>> curves;
    std::set<std::string> seen;
    for (const auto& path : options.trace_paths) {
        const LoadedTrace loaded = read_trace(path);
        std::string label = loaded.trace.run_id;
        while (seen.count(label)) {
            label += "'";
        }
        seen.insert(label);
        labels.push_back(label);
        curves.push_back(max_test_score_curve(loaded.trace));
    }

    std::vector<std::vector<std::string>> rows;
    if (curves.size() == 1) {
        rows.push_back({"step", "max_test_score"});
    } else {
        std::vector<std::string> header{"step"};
        header.insert(header.end(), labels.begin(), labels.end());
        rows.push_back(std::move(header));
    }
    std::size_t longest = 0;
    for (const auto& c : curves) {
        longest = std::max(longest, c.size());
    }
    for (std::size_t t = 0; t < longest; ++t) {
        std::vector<std::string> row{std::to_string(t)};
        for (const auto& c : curves) {
            row.push_back(t < c.size() ? format_metric(c[t]) : "");
        }
        rows.push_back(std::move(row));
    }
    write_csv(options.out, rows);
    return options.out;
}

}  // namespace promptopt::cli
