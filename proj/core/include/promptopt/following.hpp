#pragma once

#include <optional>
#include <string>
#include <vector>

#include "promptopt/backend.hpp"
#include "promptopt/tasks.hpp"
#include "promptopt/templates.hpp"
#include "promptopt/types.hpp"

namespace promptopt {

enum class InstructionKind { kKeyword, kRepeat };

struct VerifiableInstruction {
    InstructionKind kind = InstructionKind::kKeyword;
    std::string text;
};

VerifiableInstruction keyword_instruction();
VerifiableInstruction repeat_instruction();
VerifiableInstruction instruction_from_name(const std::string& name);

struct InsertionResult {
    Prompt prompt;
    bool already_present = false;
    bool used_fallback = false;
};

/// Beyond the instruction itself, the optimizer may shift at most this many
/// characters; larger diffs trip the guard and force the fallback.
inline constexpr std::size_t kInsertionEditBudget = 5;

/// Asks the optimizer to place the instruction inside the prompt, verifying
/// that the result contains the instruction exactly once and is otherwise
/// unchanged (within the edit budget). On any failure the instruction is
/// inserted deterministically after the first sentence, which never fails.
InsertionResult insert_instruction(const Prompt& prompt,
                                   const VerifiableInstruction& instruction,
                                   Backend& optimizer,
                                   const TemplateLibrary& templates);

/// Deterministic insertion after the first sentence; the counterpart
/// remove_inserted() restores the original byte-exactly.
std::string fallback_insert(const std::string& prompt_text,
                            const std::string& instruction);
std::string remove_inserted(const std::string& prompt_text,
                            const std::string& instruction);

/// keyword: the token "Alright" occurs as a whole word (case-sensitive by
/// default). repeat: the whitespace-normalized input occurs contiguously in
/// the normalized output before the answer envelope.
bool verify(const VerifiableInstruction& instruction, const std::string& input,
            const std::string& raw_output, bool keyword_case_sensitive = true);

struct FollowingMetrics {
    double afr = 0.0;
    std::optional<double> ffer;
    std::optional<double> fer;
};

struct PromptFollowingReport {
    std::string prompt_id;
    int follow_count = 0;        // examples where the instruction was followed
    bool followed_once = false;  // I2
    bool format_errors_rose = false;  // I3
    bool accuracy_fell = false;       // I4
};

struct FollowingRun {
    FollowingMetrics metrics;
    std::vector<PromptFollowingReport> per_prompt;
};

/// Evaluates each prompt and its inserted variant on the whole train split
/// and aggregates the three following metrics. The ratios are absent when
/// their denominators are zero.
FollowingRun following_metrics(const std::vector<Prompt>& step_prompts,
                               const Dataset& dataset, const AnswerSchema& schema,
                               const VerifiableInstruction& instruction,
                               Backend& target, Backend& optimizer,
                               const TemplateLibrary& templates,
                               bool keyword_case_sensitive = true);

}  // namespace promptopt
