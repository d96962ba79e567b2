#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "promptopt/backend.hpp"
#include "promptopt/rng.hpp"
#include "promptopt/types.hpp"

namespace promptopt {

enum class AnswerKind { kChoice, kNumericString };

/// How target outputs are parsed and compared for one task. Answers travel
/// in a {"answer": "<value>"} envelope; the last envelope in the output
/// wins. The bare-token fallback (off by default) additionally accepts a
/// final `A.`-style label when no envelope is present.
struct AnswerSchema {
    AnswerKind kind = AnswerKind::kChoice;
    bool bare_token_fallback = false;
    /// The format phrase initial prompts must state, e.g.
    /// `{"answer": "A"} or {"answer": "B"}`.
    std::string answer_format;
};

struct LoadedTask {
    Dataset dataset;
    AnswerSchema schema;
};

/// Reads a task manifest: name, schema, split sizes and records in order.
/// Ids are assigned from record order unless the manifest provides them.
LoadedTask load_dataset(const std::filesystem::path& manifest_path);

struct ParsedAnswer {
    std::optional<std::string> answer;
    bool format_error = true;
    std::size_t span_begin = 0;  // envelope span within the raw output
    std::size_t span_end = 0;
};

ParsedAnswer parse_answer(const std::string& raw, const AnswerSchema& schema,
                          const std::vector<Choice>& choices);

bool answers_match(const std::string& parsed, const std::string& gold,
                   const AnswerSchema& schema);

/// The example input plus its Choices block, as the target model sees it.
std::string render_example_input(const Example& ex);

/// Full user message for one example: prompt text (and demo, if any), a
/// blank line, then the ## Input / ## Output framing.
std::string render_target_user_message(const Prompt& prompt, const Example& ex);

/// Scores a prompt on a split. Examples may be evaluated concurrently up to
/// the backend's limit; outcomes are ordered by example regardless of
/// completion order. Backend failures carry the example id.
ScoredPrompt evaluate_prompt(const Prompt& prompt, const Dataset& dataset,
                             Split split, Backend& target,
                             const AnswerSchema& schema);

struct ErrorExample {
    std::string example_id;
    std::string input;
    std::string gold;
    std::string model_answer;  // full raw output
};

/// Uniform sample (without replacement) of up to k wrong outcomes.
std::vector<ErrorExample> sample_errors(const ScoredPrompt& scored,
                                        const Dataset& dataset, int k,
                                        SubstreamRng& rng);

/// Re-labels every parseable outcome with a uniformly chosen different
/// answer, re-rendered inside the raw output so explanation text survives,
/// then recomputes correctness. Format-error outcomes pass through with
/// flipped=false.
std::vector<EvalOutcome> flip_predictions(const ScoredPrompt& scored,
                                          const Dataset& dataset,
                                          const AnswerSchema& schema,
                                          SubstreamRng& rng);

std::vector<ErrorExample> sample_pseudo_errors(const std::vector<EvalOutcome>& pseudo,
                                               const Dataset& dataset, int k,
                                               SubstreamRng& rng);

}  // namespace promptopt
