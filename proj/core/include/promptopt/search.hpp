#pragma once

#include <optional>
#include <string>

#include "promptopt/trace_io.hpp"
#include "promptopt/types.hpp"
#include "promptopt/updaters.hpp"

namespace promptopt {

struct RunInputs {
    BeamConfig config;
    Method method = Method::kApe;
    const Dataset* dataset = nullptr;
    const AnswerSchema* schema = nullptr;
    Backend* optimizer = nullptr;
    Backend* target = nullptr;
    const TemplateLibrary* templates = nullptr;
    std::string run_id;
    bool pseudo_reflection = false;
    /// When set, only the best-by-train selected prompt is test-scored.
    bool test_best_only = false;
};

/// The unified beam-search run: LLM initialization at step 0, then
/// total_steps rounds of expand / train-score / select / test-score.
/// Candidates join the previous selection in the pool, so a regressing
/// update never collapses the beam. When a sink is given, every step is
/// persisted as soon as it is recorded; if an updater empties a step's
/// candidate set the partial trace survives and RunAborted is thrown.
RunTrace run(const RunInputs& inputs, TraceWriter* sink = nullptr);

/// Starts a fresh trace from the prompts selected at `from_step` of the
/// source trace (their recorded scores are carried over as the new step 0)
/// and runs `remaining_steps` with a different updater. Lineage crosses the
/// seam unchanged.
RunTrace resume_with(const RunTrace& source, int from_step, Method new_method,
                     int remaining_steps, const RunInputs& inputs,
                     TraceWriter* sink = nullptr);

/// Selection order for the union pool: higher train accuracy first, then
/// earlier creation step, then lexicographic id.
bool selection_precedes(const Prompt& a, double score_a, const Prompt& b,
                        double score_b);

}  // namespace promptopt
