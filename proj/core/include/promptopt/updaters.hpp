#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "promptopt/backend.hpp"
#include "promptopt/tasks.hpp"
#include "promptopt/templates.hpp"
#include "promptopt/types.hpp"

namespace promptopt {

/// Global prompt/score history for implicit-reflection updating: ascending
/// by score, capped, lowest evicted first. Scores are round(100 * accuracy).
class OproHistory {
public:
    explicit OproHistory(std::size_t cap = 20) : cap_(cap) {}

    struct Entry {
        std::string text;
        int score = 0;
    };

    void insert(std::string text, double train_accuracy);
    void insert_scored(std::string text, int score);

    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t cap() const { return cap_; }

    /// text:/score: blocks in ascending order, separated by blank lines.
    std::string render_block(const TemplateLibrary& lib) const;

private:
    std::size_t cap_;
    std::vector<Entry> entries_;
};

int history_score(double train_accuracy);

/// Shared state handed to every updater invocation. `step` is the step the
/// children are created at; ids and the optional history are owned by the
/// surrounding run.
struct UpdateContext {
    Backend* optimizer = nullptr;
    Backend* target = nullptr;
    const TemplateLibrary* templates = nullptr;
    const Dataset* dataset = nullptr;
    const AnswerSchema* schema = nullptr;
    int error_sample_k = 4;
    std::uint64_t seed = 0;
    bool pseudo_reflection = false;
    std::string run_label;
    int step = 0;
    IdAllocator* ids = nullptr;
    OproHistory* opro_history = nullptr;

    SubstreamRng substream(std::string_view name, std::uint64_t a = 0,
                           std::uint64_t b = 0) const;

    /// Error examples for reflection: sampled from the real error
    /// distribution, or from uniformly flipped predictions when the run is
    /// in pseudo mode.
    std::vector<ErrorExample> reflection_errors(const Prompt& prompt,
                                                const ScoredPrompt& scored,
                                                std::uint64_t salt = 0) const;
};

struct Expansion {
    std::vector<Prompt> children;
    std::vector<Feedback> feedbacks;
};

/// Resampling: n independent variation queries, no error examples consumed.
std::vector<Prompt> ape_update(const Prompt& prompt, int n, UpdateContext& ctx);

/// Two-call explicit reflection: one call yields three wrapped reasons, a
/// second rewrites the prompt into two improved candidates.
Expansion apo_update(const Prompt& prompt, const ScoredPrompt& scored, int n,
                     UpdateContext& ctx);

/// Single-call reflect-and-refine; the analysis prose (minus the wrapped
/// instruction) is kept as one feedback per child.
Expansion apo_sum_update(const Prompt& prompt, const ScoredPrompt& scored, int n,
                         UpdateContext& ctx);

/// Strategic reflection: the whole reflection response is the feedback.
Expansion prompt_agent_update(const Prompt& prompt, const ScoredPrompt& scored,
                              int n, UpdateContext& ctx);

/// Implicit reflection over the global history; children are parented to
/// the current best prompt. Each call uses a fresh error sample.
std::vector<Prompt> opro_update(const OproHistory& history, const Prompt& best,
                                const ScoredPrompt& best_scored, int n,
                                UpdateContext& ctx);

/// Standard LLM-based initialization: two queries conditioned on four
/// input/answer pairs and the task's answer-format sentence, five prompts
/// each.
std::vector<Prompt> initialize_prompts(UpdateContext& ctx);

/// Step-by-step initialization plus one demonstration-writing call per
/// prompt.
std::vector<Prompt> abo_init(UpdateContext& ctx);

/// Behavior refinement: per child, one call names the failing step and
/// rewrites the instruction, a second rewrites the demonstration.
Expansion abo_update(const Prompt& prompt, const ScoredPrompt& scored, int n,
                     UpdateContext& ctx);

inline constexpr std::string_view kAblationSystemPrompt =
    "Strictly follow every detail of the instruction.";
inline constexpr std::string_view kAblationInstructionPrefix =
    "STRICTLY follow every detail of the following instruction.";

/// Demo-ablation transform: drops the demonstration and attaches the two
/// literal strict-follow strings. Throws Error when the prompt has no demo.
Prompt abo_ablate(const Prompt& prompt);

}  // namespace promptopt
