#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace promptopt {

enum class Method {
    kApe,
    kApo,
    kApoSum,
    kPromptAgent,
    kOpro,
    kAbo,
    kManual,
    kInit,
};

std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

/// True for updaters that emit Feedback records (the explicit-reflection
/// family plus behavior optimization). Resampling and implicit reflection
/// never produce feedback text.
bool is_reflective(Method m);

/// Header inserted between an instruction and its attached demonstration
/// when a prompt is rendered for the target model.
inline constexpr std::string_view kDemoHeader =
    "#### Examples\nHere are some examples to help you thinking.";

/// One candidate instruction in the search space.
struct Prompt {
    std::string id;
    std::string text;
    std::optional<std::string> demo;         // instruction-following demonstration
    std::optional<std::string> system_text;  // set by the demo-ablation transform
    Method method = Method::kInit;
    int step = 0;
    std::optional<std::string> parent_id;
    bool demo_stripped = false;

    /// Instruction text plus, when a demo is attached, the examples header
    /// and the demonstration.
    std::string full_text() const;
};

struct Choice {
    std::string label;
    std::string text;
};

struct Example {
    std::string id;
    std::string input;
    std::string gold;
    std::vector<Choice> choices;  // empty for free-form answers
};

enum class Split { kInit, kTrain, kTest };

std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

struct Dataset {
    std::string name;
    std::vector<Example> init_split;
    std::vector<Example> train_split;
    std::vector<Example> test_split;

    const std::vector<Example>& split(Split s) const;
    const Example* find(const std::string& example_id) const;
};

/// The target model's outcome on one example.
struct EvalOutcome {
    std::string example_id;
    std::string raw_output;
    std::optional<std::string> parsed_answer;
    bool correct = false;
    bool format_error = false;
    /// Set by prediction flipping: true when the answer was altered, false
    /// when a format error made the outcome unflippable. Unset otherwise.
    std::optional<bool> flipped;
};

struct ScoredPrompt {
    std::string prompt_id;
    Split split = Split::kTrain;
    double accuracy = 0.0;
    std::vector<EvalOutcome> outcomes;
};

/// Mean correctness. Throws TraceError on an empty list: a prompt scored on
/// zero outcomes is a harness bug, not a zero.
double compute_accuracy(const std::vector<EvalOutcome>& outcomes);

/// One reflection text, tied to the prompt and step that produced it.
struct Feedback {
    std::string id;
    std::string prompt_id;
    int step = 0;
    std::string source;
    std::string text;
    std::optional<std::string> cluster_id;
};

struct Cluster {
    std::string id;
    std::string description;
};

/// The unified-setting knobs.
struct BeamConfig {
    int initial_size = 10;
    int expansion_per_prompt = 2;
    int selection_size = 5;
    int total_steps = 10;
    int error_sample_k = 4;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError when a size is < 1
};

struct StepRecord {
    int step = 0;
    std::vector<Prompt> candidates;
    std::vector<ScoredPrompt> train_scores;
    std::vector<std::string> selected;
    std::vector<ScoredPrompt> test_scores;
    std::vector<Feedback> feedbacks;
};

/// Where a resumed trace split off from its source run.
struct RunSeam {
    std::string source_run_id;
    int from_step = 0;
};

struct RunTrace {
    std::string run_id;
    std::string task_name;
    Method method = Method::kInit;
    BeamConfig config;
    bool pseudo_reflection = false;
    std::optional<RunSeam> seam;
    std::vector<StepRecord> steps;
};

/// Appends a step record, enforcing contiguous step indices and the
/// per-record invariants (selection size, selected ids known).
void record_step(RunTrace& trace, StepRecord record);

/// Best test accuracy seen up to each step; nondecreasing by construction.
/// Throws TraceError naming the first step that has no test evaluations.
std::vector<double> max_test_score_curve(const RunTrace& trace);

/// Content-independent ids derived from (run seed, step, per-step ordinal),
/// so reruns with the same seed produce identical traces.
class IdAllocator {
public:
    explicit IdAllocator(std::uint64_t seed) : seed_(seed) {}

    std::string next_prompt_id(int step);
    std::string next_feedback_id(int step);

private:
    std::string next(char tag, int step, std::vector<std::pair<int, int>>& counters);

    std::uint64_t seed_;
    std::vector<std::pair<int, int>> prompt_counters_;    // (step, next ordinal)
    std::vector<std::pair<int, int>> feedback_counters_;
};

}  // namespace promptopt
