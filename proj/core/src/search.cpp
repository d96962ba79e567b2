#include "promptopt/search.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "promptopt/errors.hpp"

namespace promptopt {

bool selection_precedes(const Prompt& a, double score_a, const Prompt& b,
                        double score_b) {
    if (score_a != score_b) {
        return score_a > score_b;
    }
    if (a.step != b.step) {
        return a.step < b.step;
    }
    return a.id < b.id;
}

namespace {

struct RunState {
    std::map<std::string, Prompt> prompts;
    std::map<std::string, ScoredPrompt> train;
    std::map<std::string, ScoredPrompt> test;
};

std::vector<std::string> select_top(const std::vector<std::string>& pool,
                                    const RunState& state, int k) {
    std::vector<std::string> sorted = pool;
    std::sort(sorted.begin(), sorted.end(),
              [&](const std::string& x, const std::string& y) {
                  return selection_precedes(state.prompts.at(x),
                                            state.train.at(x).accuracy,
                                            state.prompts.at(y),
                                            state.train.at(y).accuracy);
              });
    if (static_cast<int>(sorted.size()) > k) {
        sorted.resize(k);
    }
    return sorted;
}

std::vector<ScoredPrompt> test_score_selected(const std::vector<std::string>& selected,
                                              RunState& state,
                                              const RunInputs& inputs) {
    std::vector<ScoredPrompt> scores;
    const std::size_t count = inputs.test_best_only ? 1 : selected.size();
    for (std::size_t i = 0; i < count && i < selected.size(); ++i) {
        const std::string& id = selected[i];
        auto it = state.test.find(id);
        if (it == state.test.end()) {
            ScoredPrompt s = evaluate_prompt(state.prompts.at(id), *inputs.dataset,
                                             Split::kTest, *inputs.target,
                                             *inputs.schema);
            it = state.test.emplace(id, std::move(s)).first;
        }
        scores.push_back(it->second);
    }
    return scores;
}

Expansion expand_selected(Method method, const std::vector<std::string>& selected,
                          RunState& state, OproHistory& history,
                          UpdateContext& ctx, const BeamConfig& config) {
    Expansion all;
    if (method == Method::kOpro) {
        const std::string& best_id = selected.front();
        const int n = config.selection_size * config.expansion_per_prompt;
        all.children = opro_update(history, state.prompts.at(best_id),
                                   state.train.at(best_id), n, ctx);
        return all;
    }
    for (const std::string& id : selected) {
        const Prompt& parent = state.prompts.at(id);
        const ScoredPrompt& scored = state.train.at(id);
        Expansion one;
        switch (method) {
            case Method::kApe:
                one.children = ape_update(parent, config.expansion_per_prompt, ctx);
                break;
            case Method::kApo:
                one = apo_update(parent, scored, config.expansion_per_prompt, ctx);
                break;
            case Method::kApoSum:
                one = apo_sum_update(parent, scored, config.expansion_per_prompt, ctx);
                break;
            case Method::kPromptAgent:
                one = prompt_agent_update(parent, scored, config.expansion_per_prompt,
                                          ctx);
                break;
            case Method::kAbo:
                one = abo_update(parent, scored, config.expansion_per_prompt, ctx);
                break;
            default:
                throw ConfigError(fmt::format("method \"{}\" is not an updater",
                                              to_string(method)));
        }
        std::move(one.children.begin(), one.children.end(),
                  std::back_inserter(all.children));
        std::move(one.feedbacks.begin(), one.feedbacks.end(),
                  std::back_inserter(all.feedbacks));
    }
    return all;
}

void run_update_steps(RunTrace& trace, RunState& state,
                      std::vector<std::string> selected, OproHistory& history,
                      UpdateContext& ctx, const RunInputs& inputs,
                      TraceWriter* sink) {
    const BeamConfig& config = trace.config;
    for (int t = 1; t <= config.total_steps; ++t) {
        ctx.step = t;
        Expansion expansion =
            expand_selected(trace.method, selected, state, history, ctx, config);
        if (expansion.children.empty()) {
            throw RunAborted(fmt::format(
                "step {}: updater produced no candidates; partial trace kept", t));
        }

        StepRecord record;
        record.step = t;
        std::vector<std::string> pool = selected;
        for (const Prompt& child : expansion.children) {
            state.prompts.emplace(child.id, child);  // fixed points already exist
            if (!state.train.count(child.id)) {
                state.train.emplace(
                    child.id, evaluate_prompt(child, *inputs.dataset, Split::kTrain,
                                              *inputs.target, *inputs.schema));
            }
            record.train_scores.push_back(state.train.at(child.id));
            if (std::find(pool.begin(), pool.end(), child.id) == pool.end()) {
                pool.push_back(child.id);
            }
            if (trace.method == Method::kOpro) {
                history.insert(child.text, state.train.at(child.id).accuracy);
            }
        }
        record.candidates = expansion.children;
        record.feedbacks = std::move(expansion.feedbacks);
        selected = select_top(pool, state, config.selection_size);
        record.selected = selected;
        record.test_scores = test_score_selected(selected, state, inputs);

        record_step(trace, record);
        if (sink) {
            sink->add_step(trace.steps.back());
        }
    }
}

UpdateContext make_context(const RunInputs& inputs, const RunTrace& trace,
                           IdAllocator& ids, OproHistory& history) {
    UpdateContext ctx;
    ctx.optimizer = inputs.optimizer;
    ctx.target = inputs.target;
    ctx.templates = inputs.templates;
    ctx.dataset = inputs.dataset;
    ctx.schema = inputs.schema;
    ctx.error_sample_k = trace.config.error_sample_k;
    ctx.seed = trace.config.seed;
    ctx.pseudo_reflection = inputs.pseudo_reflection;
    ctx.run_label = trace.run_id;
    ctx.ids = &ids;
    ctx.opro_history = &history;
    return ctx;
}

}  // namespace

RunTrace run(const RunInputs& inputs, TraceWriter* sink) {
    inputs.config.validate();
    RunTrace trace;
    trace.run_id = inputs.run_id;
    trace.task_name = inputs.dataset->name;
    trace.method = inputs.method;
    trace.config = inputs.config;
    trace.pseudo_reflection = inputs.pseudo_reflection;

    IdAllocator ids(inputs.config.seed);
    OproHistory history;
    UpdateContext ctx = make_context(inputs, trace, ids, history);
    RunState state;

    ctx.step = 0;
    std::vector<Prompt> initial = inputs.method == Method::kAbo
                                      ? abo_init(ctx)
                                      : initialize_prompts(ctx);

    StepRecord record;
    record.step = 0;
    std::vector<std::string> pool;
    for (const Prompt& p : initial) {
        state.prompts.emplace(p.id, p);
        state.train.emplace(p.id, evaluate_prompt(p, *inputs.dataset, Split::kTrain,
                                                  *inputs.target, *inputs.schema));
        record.train_scores.push_back(state.train.at(p.id));
        pool.push_back(p.id);
        if (inputs.method == Method::kOpro) {
            history.insert(p.text, state.train.at(p.id).accuracy);
        }
    }
    record.candidates = initial;
    std::vector<std::string> selected =
        select_top(pool, state, inputs.config.selection_size);
    record.selected = selected;
    record.test_scores = test_score_selected(selected, state, inputs);
    record_step(trace, record);
    if (sink) {
        sink->add_step(trace.steps.back());
    }

    run_update_steps(trace, state, std::move(selected), history, ctx, inputs, sink);
    return trace;
}

RunTrace resume_with(const RunTrace& source, int from_step, Method new_method,
                     int remaining_steps, const RunInputs& inputs,
                     TraceWriter* sink) {
    if (from_step < 0 || from_step >= static_cast<int>(source.steps.size())) {
        throw TraceError(fmt::format("from_step {} outside trace with {} steps",
                                     from_step, source.steps.size()));
    }

    RunTrace trace;
    trace.run_id = inputs.run_id;
    trace.task_name = source.task_name;
    trace.method = new_method;
    trace.config = inputs.config;
    trace.config.total_steps = remaining_steps;
    trace.pseudo_reflection = inputs.pseudo_reflection;
    trace.seam = RunSeam{source.run_id, from_step};

    RunState state;
    // Pull the seam prompts and their recorded scores out of the source.
    for (int t = 0; t <= from_step; ++t) {
        const StepRecord& rec = source.steps[t];
        for (const Prompt& p : rec.candidates) {
            state.prompts[p.id] = p;
        }
        for (const ScoredPrompt& s : rec.train_scores) {
            state.train[s.prompt_id] = s;
        }
        for (const ScoredPrompt& s : rec.test_scores) {
            state.test[s.prompt_id] = s;
        }
    }
    const std::vector<std::string> selected = source.steps[from_step].selected;
    for (const auto& id : selected) {
        if (!state.prompts.count(id) || !state.train.count(id)) {
            throw TraceError(fmt::format("seam prompt {} lacks a recorded score", id));
        }
    }

    // Resumed runs allocate ids under a derived seed so two traces sharing a
    // master seed cannot mint colliding ids.
    IdAllocator ids(trace.config.seed ^ fnv1a(trace.run_id));
    OproHistory history;
    UpdateContext ctx = make_context(inputs, trace, ids, history);

    StepRecord record;
    record.step = 0;
    for (const auto& id : selected) {
        record.candidates.push_back(state.prompts.at(id));
        record.train_scores.push_back(state.train.at(id));
        if (new_method == Method::kOpro) {
            history.insert(state.prompts.at(id).text, state.train.at(id).accuracy);
        }
    }
    record.selected = selected;
    record.test_scores = test_score_selected(selected, state, inputs);
    record_step(trace, record);
    if (sink) {
        sink->add_step(trace.steps.back());
    }

    run_update_steps(trace, state, selected, history, ctx, inputs, sink);
    return trace;
}

}  // namespace promptopt
