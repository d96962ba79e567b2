#pragma once

#include <filesystem>
#include <fstream>
#include <optional>

#include <nlohmann/json.hpp>

#include "promptopt/types.hpp"

namespace promptopt {

nlohmann::json to_json(const Prompt& p);
Prompt prompt_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EvalOutcome& o);
EvalOutcome outcome_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ScoredPrompt& s);
ScoredPrompt scored_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Feedback& f);
Feedback feedback_from_json(const nlohmann::json& j);

nlohmann::json to_json(const BeamConfig& c);
BeamConfig beam_from_json(const nlohmann::json& j);

nlohmann::json to_json(const StepRecord& r);
StepRecord step_from_json(const nlohmann::json& j);

/// The header line of a persisted trace: run identity plus, when available,
/// the resolved run configuration so resume/ablate can rebuild the setup.
nlohmann::json trace_header(const RunTrace& trace,
                            const nlohmann::json& run_config = {});

/// Streaming writer: one header line, then one StepRecord per line. Each
/// line is flushed so aborted runs leave a readable partial trace behind.
class TraceWriter {
public:
    TraceWriter(const std::filesystem::path& path, const nlohmann::json& header);
    void add_step(const StepRecord& record);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

struct LoadedTrace {
    RunTrace trace;
    nlohmann::json run_config;  // null when the header carried none
};

LoadedTrace read_trace(const std::filesystem::path& path);
void write_trace(const std::filesystem::path& path, const RunTrace& trace,
                 const nlohmann::json& run_config = {});

}  // namespace promptopt
