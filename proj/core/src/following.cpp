#include "promptopt/following.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "promptopt/errors.hpp"
#include "promptopt/strings.hpp"

namespace promptopt {

VerifiableInstruction keyword_instruction() {
    return {InstructionKind::kKeyword,
            "Include the keyword \"Alright\" in your response."};
}

VerifiableInstruction repeat_instruction() {
    return {InstructionKind::kRepeat,
            "First repeat the input without change, then give your answer."};
}

VerifiableInstruction instruction_from_name(const std::string& name) {
    if (name == "keyword") {
        return keyword_instruction();
    }
    if (name == "repeat") {
        return repeat_instruction();
    }
    throw ConfigError(fmt::format("unknown instruction \"{}\"", name));
}

namespace {

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
    std::size_t count = 0;
    for (std::size_t pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

}  // namespace

std::string fallback_insert(const std::string& prompt_text,
                            const std::string& instruction) {
    const std::size_t sentence_end = prompt_text.find(". ");
    if (sentence_end != std::string::npos) {
        return prompt_text.substr(0, sentence_end + 2) + instruction + " " +
               prompt_text.substr(sentence_end + 2);
    }
    return prompt_text + "\n" + instruction;
}

std::string remove_inserted(const std::string& prompt_text,
                            const std::string& instruction) {
    for (const std::string& needle :
         {instruction + " ", "\n" + instruction, " " + instruction, instruction}) {
        const std::size_t pos = prompt_text.find(needle);
        if (pos != std::string::npos) {
            return prompt_text.substr(0, pos) + prompt_text.substr(pos + needle.size());
        }
    }
    return prompt_text;
}

InsertionResult insert_instruction(const Prompt& prompt,
                                   const VerifiableInstruction& instruction,
                                   Backend& optimizer,
                                   const TemplateLibrary& templates) {
    InsertionResult result;
    result.prompt = prompt;
    result.prompt.id = prompt.id + "-insert";
    result.prompt.parent_id = prompt.id;

    if (prompt.text.find(instruction.text) != std::string::npos) {
        result.prompt.id = prompt.id;
        result.prompt.parent_id = prompt.parent_id;
        result.already_present = true;
        return result;
    }

    const std::string user = render(templates.get("insert_instruction"),
                                    {{"ins", prompt.text},
                                     {"instruction", instruction.text}});
    std::string candidate;
    try {
        const std::string response = optimizer.complete(optimizer.request(user)).text;
        auto spans = extract_wrapped(response, "<START>", "<END>");
        candidate = spans.empty() ? std::string(trim(response)) : spans.front();
    } catch (const Error&) {
        candidate.clear();  // transport trouble: the fallback still succeeds
    }

    bool acceptable = count_occurrences(candidate, instruction.text) == 1;
    if (acceptable) {
        const std::string restored = remove_inserted(candidate, instruction.text);
        acceptable = edit_distance(restored, prompt.text) <= kInsertionEditBudget;
    }
    if (!acceptable) {
        candidate = fallback_insert(prompt.text, instruction.text);
        result.used_fallback = true;
    }
    result.prompt.text = std::move(candidate);
    return result;
}

bool verify(const VerifiableInstruction& instruction, const std::string& input,
            const std::string& raw_output, bool keyword_case_sensitive) {
    if (instruction.kind == InstructionKind::kKeyword) {
        const std::string haystack =
            keyword_case_sensitive ? raw_output : to_lower(raw_output);
        const std::string word = keyword_case_sensitive ? "Alright" : "alright";
        for (std::size_t pos = haystack.find(word); pos != std::string::npos;
             pos = haystack.find(word, pos + 1)) {
            const bool left_ok =
                pos == 0 || !std::isalnum(static_cast<unsigned char>(haystack[pos - 1]));
            const std::size_t end = pos + word.size();
            const bool right_ok =
                end >= haystack.size() ||
                !std::isalnum(static_cast<unsigned char>(haystack[end]));
            if (left_ok && right_ok) {
                return true;
            }
        }
        return false;
    }

    // repeat: normalized input must appear before the answer envelope
    std::string scope = raw_output;
    AnswerSchema envelope_only;  // any schema finds the same envelope span
    const ParsedAnswer parsed = parse_answer(raw_output, envelope_only, {});
    if (!parsed.format_error && parsed.span_end > parsed.span_begin) {
        scope = raw_output.substr(0, parsed.span_begin);
    }
    const std::string needle = collapse_whitespace(input);
    if (needle.empty()) {
        return false;
    }
    return collapse_whitespace(scope).find(needle) != std::string::npos;
}

FollowingRun following_metrics(const std::vector<Prompt>& step_prompts,
                               const Dataset& dataset, const AnswerSchema& schema,
                               const VerifiableInstruction& instruction,
                               Backend& target, Backend& optimizer,
                               const TemplateLibrary& templates,
                               bool keyword_case_sensitive) {
    if (step_prompts.empty()) {
        throw Error("following metrics need at least one prompt");
    }
    const std::size_t n_examples = dataset.train_split.size();

    FollowingRun run;
    long long follow_total = 0;
    int i2_and_i3 = 0;
    int i3_total = 0;
    int i2_and_i4 = 0;
    int i4_total = 0;

    for (const Prompt& prompt : step_prompts) {
        const ScoredPrompt original =
            evaluate_prompt(prompt, dataset, Split::kTrain, target, schema);
        const InsertionResult inserted =
            insert_instruction(prompt, instruction, optimizer, templates);
        const ScoredPrompt altered =
            evaluate_prompt(inserted.prompt, dataset, Split::kTrain, target, schema);

        PromptFollowingReport report;
        report.prompt_id = prompt.id;
        for (const EvalOutcome& outcome : altered.outcomes) {
            const Example* ex = dataset.find(outcome.example_id);
            if (ex != nullptr &&
                verify(instruction, ex->input, outcome.raw_output,
                       keyword_case_sensitive)) {
                ++report.follow_count;
            }
        }
        report.followed_once = report.follow_count > 0;

        auto format_errors = [](const ScoredPrompt& s) {
            return std::count_if(s.outcomes.begin(), s.outcomes.end(),
                                 [](const EvalOutcome& o) { return o.format_error; });
        };
        report.format_errors_rose = format_errors(altered) > format_errors(original);
        report.accuracy_fell = altered.accuracy < original.accuracy;

        follow_total += report.follow_count;
        i3_total += report.format_errors_rose ? 1 : 0;
        i4_total += report.accuracy_fell ? 1 : 0;
        i2_and_i3 += (report.followed_once && report.format_errors_rose) ? 1 : 0;
        i2_and_i4 += (report.followed_once && report.accuracy_fell) ? 1 : 0;
        run.per_prompt.push_back(report);
    }

    run.metrics.afr = static_cast<double>(follow_total) /
                      (static_cast<double>(step_prompts.size()) *
                       static_cast<double>(n_examples));
    if (i3_total > 0) {
        run.metrics.ffer = static_cast<double>(i2_and_i3) / i3_total;
    }
    if (i4_total > 0) {
        run.metrics.fer = static_cast<double>(i2_and_i4) / i4_total;
    }
    return run;
}

}  // namespace promptopt
