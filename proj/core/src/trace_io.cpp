#include "promptopt/trace_io.hpp"

#include <fmt/format.h>

#include "promptopt/errors.hpp"

namespace promptopt {

using nlohmann::json;

json to_json(const Prompt& p) {
    json j{{"id", p.id}, {"text", p.text}, {"method", to_string(p.method)},
           {"step", p.step}};
    if (p.demo) j["demo"] = *p.demo;
    if (p.system_text) j["system"] = *p.system_text;
    if (p.parent_id) j["parent_id"] = *p.parent_id;
    if (p.demo_stripped) j["demo_stripped"] = true;
    return j;
}

Prompt prompt_from_json(const json& j) {
    Prompt p;
    p.id = j.at("id").get<std::string>();
    p.text = j.at("text").get<std::string>();
    p.method = method_from_string(j.at("method").get<std::string>());
    p.step = j.at("step").get<int>();
    if (j.contains("demo")) p.demo = j.at("demo").get<std::string>();
    if (j.contains("system")) p.system_text = j.at("system").get<std::string>();
    if (j.contains("parent_id")) p.parent_id = j.at("parent_id").get<std::string>();
    p.demo_stripped = j.value("demo_stripped", false);
    return p;
}

json to_json(const EvalOutcome& o) {
    json j{{"example_id", o.example_id}, {"raw_output", o.raw_output},
           {"correct", o.correct}, {"format_error", o.format_error}};
    if (o.parsed_answer) j["parsed_answer"] = *o.parsed_answer;
    if (o.flipped) j["flipped"] = *o.flipped;
    return j;
}

EvalOutcome outcome_from_json(const json& j) {
    EvalOutcome o;
    o.example_id = j.at("example_id").get<std::string>();
    o.raw_output = j.at("raw_output").get<std::string>();
    o.correct = j.at("correct").get<bool>();
    o.format_error = j.at("format_error").get<bool>();
    if (j.contains("parsed_answer")) o.parsed_answer = j.at("parsed_answer").get<std::string>();
    if (j.contains("flipped")) o.flipped = j.at("flipped").get<bool>();
    return o;
}

json to_json(const ScoredPrompt& s) {
    json outcomes = json::array();
    for (const auto& o : s.outcomes) {
        outcomes.push_back(to_json(o));
    }
    return json{{"prompt_id", s.prompt_id}, {"split", to_string(s.split)},
                {"accuracy", s.accuracy}, {"outcomes", std::move(outcomes)}};
}

ScoredPrompt scored_from_json(const json& j) {
    ScoredPrompt s;
    s.prompt_id = j.at("prompt_id").get<std::string>();
    s.split = split_from_string(j.at("split").get<std::string>());
    s.accuracy = j.at("accuracy").get<double>();
    for (const auto& o : j.at("outcomes")) {
        s.outcomes.push_back(outcome_from_json(o));
    }
    return s;
}

json to_json(const Feedback& f) {
    json j{{"id", f.id}, {"prompt_id", f.prompt_id}, {"step", f.step},
           {"source", f.source}, {"text", f.text}};
    if (f.cluster_id) j["cluster_id"] = *f.cluster_id;
    return j;
}

Feedback feedback_from_json(const json& j) {
    Feedback f;
    f.id = j.at("id").get<std::string>();
    f.prompt_id = j.at("prompt_id").get<std::string>();
    f.step = j.at("step").get<int>();
    f.source = j.at("source").get<std::string>();
    f.text = j.at("text").get<std::string>();
    if (j.contains("cluster_id")) f.cluster_id = j.at("cluster_id").get<std::string>();
    return f;
}

json to_json(const BeamConfig& c) {
    return json{{"initial_size", c.initial_size},
                {"expansion_per_prompt", c.expansion_per_prompt},
                {"selection_size", c.selection_size},
                {"total_steps", c.total_steps},
                {"error_sample_k", c.error_sample_k},
                {"seed", c.seed}};
}

BeamConfig beam_from_json(const json& j) {
    BeamConfig c;
    c.initial_size = j.value("initial_size", c.initial_size);
    c.expansion_per_prompt = j.value("expansion_per_prompt", c.expansion_per_prompt);
    c.selection_size = j.value("selection_size", c.selection_size);
    c.total_steps = j.value("total_steps", c.total_steps);
    c.error_sample_k = j.value("error_sample_k", c.error_sample_k);
    c.seed = j.value("seed", c.seed);
    return c;
}

json to_json(const StepRecord& r) {
    json candidates = json::array();
    for (const auto& p : r.candidates) candidates.push_back(to_json(p));
    json train = json::array();
    for (const auto& s : r.train_scores) train.push_back(to_json(s));
    json test = json::array();
    for (const auto& s : r.test_scores) test.push_back(to_json(s));
    json feedbacks = json::array();
    for (const auto& f : r.feedbacks) feedbacks.push_back(to_json(f));
    return json{{"step", r.step},
                {"candidates", std::move(candidates)},
                {"train_scores", std::move(train)},
                {"selected", r.selected},
                {"test_scores", std::move(test)},
                {"feedbacks", std::move(feedbacks)}};
}

StepRecord step_from_json(const json& j) {
    StepRecord r;
    r.step = j.at("step").get<int>();
    for (const auto& p : j.at("candidates")) r.candidates.push_back(prompt_from_json(p));
    for (const auto& s : j.at("train_scores")) r.train_scores.push_back(scored_from_json(s));
    r.selected = j.at("selected").get<std::vector<std::string>>();
    for (const auto& s : j.at("test_scores")) r.test_scores.push_back(scored_from_json(s));
    for (const auto& f : j.at("feedbacks")) r.feedbacks.push_back(feedback_from_json(f));
    return r;
}

json trace_header(const RunTrace& trace, const json& run_config) {
    json h{{"run_id", trace.run_id},
           {"task", trace.task_name},
           {"method", to_string(trace.method)},
           {"config", to_json(trace.config)},
           {"pseudo", trace.pseudo_reflection}};
    if (trace.seam) {
        h["seam"] = json{{"source_run_id", trace.seam->source_run_id},
                         {"from_step", trace.seam->from_step}};
    }
    if (!run_config.is_null()) {
        h["run_config"] = run_config;
    }
    return h;
}

TraceWriter::TraceWriter(const std::filesystem::path& path, const json& header)
    : path_(path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) {
        throw TraceError(fmt::format("cannot open trace file {}", path.string()));
    }
    out_ << header.dump() << "\n";
    out_.flush();
}

void TraceWriter::add_step(const StepRecord& record) {
    out_ << to_json(record).dump() << "\n";
    out_.flush();
}

LoadedTrace read_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw TraceError(fmt::format("cannot open trace file {}", path.string()));
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw TraceError(fmt::format("trace file {} is empty", path.string()));
    }
    json header = json::parse(line);

    LoadedTrace loaded;
    RunTrace& t = loaded.trace;
    t.run_id = header.at("run_id").get<std::string>();
    t.task_name = header.value("task", "");
    t.method = method_from_string(header.at("method").get<std::string>());
    t.config = beam_from_json(header.at("config"));
    t.pseudo_reflection = header.value("pseudo", false);
    if (header.contains("seam")) {
        t.seam = RunSeam{header["seam"].at("source_run_id").get<std::string>(),
                         header["seam"].at("from_step").get<int>()};
    }
    loaded.run_config = header.value("run_config", json());

    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        record_step(t, step_from_json(json::parse(line)));
    }
    return loaded;
}

void write_trace(const std::filesystem::path& path, const RunTrace& trace,
                 const json& run_config) {
    TraceWriter writer(path, trace_header(trace, run_config));
    for (const auto& rec : trace.steps) {
        writer.add_step(rec);
    }
}

}  // namespace promptopt
