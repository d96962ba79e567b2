#include "promptopt/types.hpp"

#include <algorithm>
#include <unordered_set>

#include <fmt/format.h>

#include "promptopt/errors.hpp"

namespace promptopt {

std::string_view to_string(Method m) {
    switch (m) {
        case Method::kApe: return "ape";
        case Method::kApo: return "apo";
        case Method::kApoSum: return "apo-sum";
        case Method::kPromptAgent: return "prompt-agent";
        case Method::kOpro: return "opro";
        case Method::kAbo: return "abo";
        case Method::kManual: return "manual";
        case Method::kInit: return "init";
    }
    return "?";
}

Method method_from_string(std::string_view s) {
    for (Method m : {Method::kApe, Method::kApo, Method::kApoSum, Method::kPromptAgent,
                     Method::kOpro, Method::kAbo, Method::kManual, Method::kInit}) {
        if (to_string(m) == s) {
            return m;
        }
    }
    throw ConfigError(fmt::format("unknown method \"{}\"", s));
}

bool is_reflective(Method m) {
    return m == Method::kApo || m == Method::kApoSum || m == Method::kPromptAgent ||
           m == Method::kAbo;
}

std::string Prompt::full_text() const {
    if (!demo) {
        return text;
    }
    return fmt::format("{}\n\n{}\n\n{}", text, kDemoHeader, *demo);
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::kInit: return "init";
        case Split::kTrain: return "train";
        case Split::kTest: return "test";
    }
    return "?";
}

Split split_from_string(std::string_view s) {
    if (s == "init") return Split::kInit;
    if (s == "train") return Split::kTrain;
    if (s == "test") return Split::kTest;
    throw ConfigError(fmt::format("unknown split \"{}\"", s));
}

const std::vector<Example>& Dataset::split(Split s) const {
    switch (s) {
        case Split::kInit: return init_split;
        case Split::kTrain: return train_split;
        case Split::kTest: return test_split;
    }
    return train_split;
}

const Example* Dataset::find(const std::string& example_id) const {
    for (const auto* split : {&init_split, &train_split, &test_split}) {
        for (const auto& ex : *split) {
            if (ex.id == example_id) {
                return &ex;
            }
        }
    }
    return nullptr;
}

double compute_accuracy(const std::vector<EvalOutcome>& outcomes) {
    if (outcomes.empty()) {
        throw TraceError("accuracy over an empty outcome list");
    }
    std::size_t correct = 0;
    for (const auto& o : outcomes) {
        correct += o.correct ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(outcomes.size());
}

void BeamConfig::validate() const {
    auto check = [](int v, const char* field) {
        if (v < 1) {
            throw ConfigError(fmt::format("beam.{}: must be >= 1, got {}", field, v));
        }
    };
    check(initial_size, "initial_size");
    check(expansion_per_prompt, "expansion_per_prompt");
    check(selection_size, "selection_size");
    check(total_steps, "total_steps");
    check(error_sample_k, "error_sample_k");
}

void record_step(RunTrace& trace, StepRecord record) {
    const int expected = trace.steps.empty() ? 0 : trace.steps.back().step + 1;
    if (record.step != expected) {
        throw TraceError(fmt::format("non-contiguous step index {} (expected {})",
                                     record.step, expected));
    }
    if (static_cast<int>(record.selected.size()) > trace.config.selection_size) {
        throw TraceError(fmt::format("step {}: {} selected prompts exceed selection_size {}",
                                     record.step, record.selected.size(),
                                     trace.config.selection_size));
    }
    std::unordered_set<std::string> known;
    for (const auto& p : record.candidates) {
        known.insert(p.id);
    }
    for (const auto& past : trace.steps) {
        for (const auto& id : past.selected) {
            known.insert(id);
        }
    }
    for (const auto& id : record.selected) {
        if (!known.count(id)) {
            throw TraceError(fmt::format(
                "step {}: selected id {} is neither a candidate nor previously selected",
                record.step, id));
        }
    }
    trace.steps.push_back(std::move(record));
}

std::vector<double> max_test_score_curve(const RunTrace& trace) {
    std::vector<double> curve;
    curve.reserve(trace.steps.size());
    double best = 0.0;
    for (const auto& rec : trace.steps) {
        if (rec.test_scores.empty()) {
            throw TraceError(fmt::format("step {} has no test evaluations", rec.step));
        }
        double step_max = 0.0;
        for (const auto& s : rec.test_scores) {
            step_max = std::max(step_max, s.accuracy);
        }
        best = curve.empty() ? step_max : std::max(best, step_max);
        curve.push_back(best);
    }
    return curve;
}

std::string IdAllocator::next(char tag, int step,
                              std::vector<std::pair<int, int>>& counters) {
    for (auto& [s, n] : counters) {
        if (s == step) {
            return fmt::format("{}{:x}-s{}-{}", tag, seed_, step, n++);
        }
    }
    counters.emplace_back(step, 1);
    return fmt::format("{}{:x}-s{}-0", tag, seed_, step);
}

std::string IdAllocator::next_prompt_id(int step) {
    return next('p', step, prompt_counters_);
}

std::string IdAllocator::next_feedback_id(int step) {
    return next('f', step, feedback_counters_);
}

}  // namespace promptopt
