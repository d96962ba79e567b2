#include "promptopt/updaters.hpp"

#include <cmath>
#include <iostream>

#include <fmt/format.h>

#include "promptopt/errors.hpp"
#include "promptopt/strings.hpp"

namespace promptopt {

int history_score(double train_accuracy) {
    return static_cast<int>(std::lround(100.0 * train_accuracy));
}

void OproHistory::insert(std::string text, double train_accuracy) {
    insert_scored(std::move(text), history_score(train_accuracy));
}

void OproHistory::insert_scored(std::string text, int score) {
    auto it = entries_.begin();
    while (it != entries_.end() && it->score <= score) {
        ++it;
    }
    entries_.insert(it, Entry{std::move(text), score});
    while (entries_.size() > cap_) {
        entries_.erase(entries_.begin());  // lowest score goes first
    }
}

std::string OproHistory::render_block(const TemplateLibrary& lib) const {
    const MetaTemplate& tmpl = lib.get("opro_prompts_scores");
    std::string out;
    for (const Entry& e : entries_) {
        Bindings b{{"ins", e.text}, {"score", std::to_string(e.score)}};
        if (!out.empty()) {
            out += "\n";
        }
        std::string block = render(tmpl, b);
        while (!block.empty() && block.back() == '\n') {
            block.pop_back();
        }
        out += block;
        out += "\n";
    }
    return out;
}

SubstreamRng UpdateContext::substream(std::string_view name, std::uint64_t a,
                                      std::uint64_t b) const {
    return SubstreamRng(seed, name, a, b);
}

std::vector<ErrorExample> UpdateContext::reflection_errors(
    const Prompt& prompt, const ScoredPrompt& scored, std::uint64_t salt) const {
    const std::uint64_t key = fnv1a(prompt.id) ^ salt;
    if (pseudo_reflection) {
        SubstreamRng flip_rng(seed, "flip", static_cast<std::uint64_t>(step), key);
        auto pseudo = flip_predictions(scored, *dataset, *schema, flip_rng);
        SubstreamRng sample_rng(seed, "error-sample", static_cast<std::uint64_t>(step), key);
        return sample_pseudo_errors(pseudo, *dataset, error_sample_k, sample_rng);
    }
    SubstreamRng sample_rng(seed, "error-sample", static_cast<std::uint64_t>(step), key);
    return sample_errors(scored, *dataset, error_sample_k, sample_rng);
}

namespace {

Prompt make_child(const Prompt& parent, std::string text, Method method,
                  UpdateContext& ctx) {
    Prompt child;
    child.id = ctx.ids->next_prompt_id(ctx.step);
    child.text = std::move(text);
    child.method = method;
    child.step = ctx.step;
    child.parent_id = parent.id;
    return child;
}

Feedback make_feedback(const Prompt& parent, std::string text, UpdateContext& ctx) {
    Feedback f;
    f.id = ctx.ids->next_feedback_id(ctx.step);
    f.prompt_id = parent.id;
    f.step = ctx.step;
    f.source = ctx.run_label;
    f.text = std::move(text);
    return f;
}

/// One completion with a single retry when `bad` rejects the response.
template <typename Predicate>
std::optional<std::string> complete_with_retry(Backend& backend,
                                               const std::string& user,
                                               Predicate bad, const char* what) {
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string text = backend.complete(backend.request(user)).text;
        if (!bad(text)) {
            return text;
        }
    }
    std::cerr << "warning: " << what << " empty after retry, skipping\n";
    return std::nullopt;
}

bool blank(const std::string& s) { return trim(s).empty(); }

std::string join_numbered(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) {
            out += "\n\n";
        }
        out += fmt::format("{}. {}", i + 1, items[i]);
    }
    return out;
}

}  // namespace

std::vector<Prompt> ape_update(const Prompt& prompt, int n, UpdateContext& ctx) {
    const MetaTemplate& tmpl = ctx.templates->get("ape_prompt_refinement");
    std::vector<Prompt> children;
    for (int i = 0; i < n; ++i) {
        const std::string user = render(tmpl, {{"ins", prompt.text}});
        auto text = complete_with_retry(*ctx.optimizer, user, blank, "variation");
        if (!text) {
            continue;
        }
        children.push_back(make_child(prompt, std::string(trim(*text)), Method::kApe, ctx));
    }
    return children;
}

Expansion apo_update(const Prompt& prompt, const ScoredPrompt& scored, int n,
                     UpdateContext& ctx) {
    Expansion out;
    const std::vector<ErrorExample> errors = ctx.reflection_errors(prompt, scored);
    if (errors.empty()) {
        out.children.push_back(prompt);  // perfect-prompt fixed point
        return out;
    }
    const std::string error_block = render_error_examples(
        *ctx.templates, "apo_error_example", errors, *ctx.schema);

    const std::string reflection_user =
        render(ctx.templates->get("apo_reflection"),
               {{"ins", prompt.text}, {"error_examples", error_block}});
    const std::string reflection =
        ctx.optimizer->complete(ctx.optimizer->request(reflection_user)).text;
    std::vector<std::string> reasons = extract_wrapped(reflection, "<START>", "<END>");
    if (reasons.size() > 3) {
        std::cerr << "warning: reflection produced " << reasons.size()
                  << " reasons, keeping the first 3\n";
        reasons.resize(3);
    }
    for (const auto& reason : reasons) {
        out.feedbacks.push_back(make_feedback(prompt, reason, ctx));
    }

    const std::string refine_user =
        render(ctx.templates->get("apo_prompt_refinement"),
               {{"ins", prompt.text},
                {"error_examples", error_block},
                {"feedbacks", join_numbered(reasons)}});
    const std::string refined =
        ctx.optimizer->complete(ctx.optimizer->request(refine_user)).text;
    std::vector<std::string> prompts = extract_wrapped(refined, "<START>", "<END>");
    if (static_cast<int>(prompts.size()) > n) {
        std::cerr << "warning: refinement produced " << prompts.size()
                  << " prompts, keeping the first " << n << "\n";
        prompts.resize(n);
    }
    for (auto& text : prompts) {
        out.children.push_back(make_child(prompt, std::move(text), Method::kApo, ctx));
    }
    return out;
}

Expansion apo_sum_update(const Prompt& prompt, const ScoredPrompt& scored, int n,
                         UpdateContext& ctx) {
    Expansion out;
    const MetaTemplate& tmpl = ctx.templates->get("apo_sum_reflection_refinement");
    for (int i = 0; i < n; ++i) {
        const auto errors =
            ctx.reflection_errors(prompt, scored, static_cast<std::uint64_t>(i));
        if (errors.empty()) {
            if (out.children.empty()) {
                out.children.push_back(prompt);
            }
            return out;
        }
        const std::string error_block = render_error_examples(
            *ctx.templates, "apo_sum_error_example", errors, *ctx.schema);
        const std::string user = render(
            tmpl, {{"ins", prompt.text}, {"error_examples", error_block}});
        const std::string response =
            ctx.optimizer->complete(ctx.optimizer->request(user)).text;
        std::vector<std::string> prompts = extract_wrapped(response, "<START>", "<END>");
        if (prompts.empty()) {
            std::cerr << "warning: combined reflection carried no instruction, skipping\n";
            continue;
        }
        out.feedbacks.push_back(
            make_feedback(prompt, strip_wrapped(response, "<START>", "<END>"), ctx));
        out.children.push_back(
            make_child(prompt, std::move(prompts.front()), Method::kApoSum, ctx));
    }
    return out;
}

Expansion prompt_agent_update(const Prompt& prompt, const ScoredPrompt& scored,
                              int n, UpdateContext& ctx) {
    Expansion out;
    const auto errors = ctx.reflection_errors(prompt, scored);
    if (errors.empty()) {
        out.children.push_back(prompt);
        return out;
    }
    const std::string error_block = render_error_examples(
        *ctx.templates, "prompt_agent_error_example", errors, *ctx.schema);

    const std::string reflection_user =
        render(ctx.templates->get("prompt_agent_reflection"),
               {{"ins", prompt.text}, {"error_examples", error_block}});
    const std::string reflection =
        ctx.optimizer->complete(ctx.optimizer->request(reflection_user)).text;
    out.feedbacks.push_back(make_feedback(prompt, reflection, ctx));

    const std::string refine_user =
        render(ctx.templates->get("prompt_agent_prompt_refinement"),
               {{"ins", prompt.text},
                {"error_examples", error_block},
                {"feedbacks", reflection}});
    const std::string refined =
        ctx.optimizer->complete(ctx.optimizer->request(refine_user)).text;
    std::vector<std::string> prompts = extract_wrapped(refined, "<START>", "<END>");
    if (static_cast<int>(prompts.size()) > n) {
        prompts.resize(n);
    }
    for (auto& text : prompts) {
        out.children.push_back(
            make_child(prompt, std::move(text), Method::kPromptAgent, ctx));
    }
    return out;
}

std::vector<Prompt> opro_update(const OproHistory& history, const Prompt& best,
                                const ScoredPrompt& best_scored, int n,
                                UpdateContext& ctx) {
    if (history.entries().empty()) {
        throw Error("implicit-reflection update requires a nonempty history");
    }
    const MetaTemplate& tmpl = ctx.templates->get("opro_prompt_refinement");
    const std::string history_block = history.render_block(*ctx.templates);

    std::vector<Prompt> children;
    for (int i = 0; i < n; ++i) {
        const auto errors =
            ctx.reflection_errors(best, best_scored, static_cast<std::uint64_t>(i));
        const std::string problems = render_error_examples(
            *ctx.templates, "opro_error_example", errors, *ctx.schema);
        const std::string user =
            render(tmpl, {{"prompts_scores", history_block},
                          {"error_examples", problems}});
        auto bad = [](const std::string& text) {
            return extract_wrapped(text, "<INS>", "</INS>").empty();
        };
        auto response = complete_with_retry(*ctx.optimizer, user, bad,
                                            "instruction span");
        if (!response) {
            continue;
        }
        auto spans = extract_wrapped(*response, "<INS>", "</INS>");
        children.push_back(
            make_child(best, std::move(spans.front()), Method::kOpro, ctx));
    }
    return children;
}

namespace {

/// 5 wrapped prompts per query, topped up with one retry per query.
std::vector<std::string> query_initial_batch(const MetaTemplate& tmpl,
                                             const std::string& examples_block,
                                             const std::string& answer_format,
                                             int want, UpdateContext& ctx) {
    const std::string user = render(tmpl, {{"examples", examples_block},
                                           {"answer_format", answer_format}});
    std::vector<std::string> batch;
    for (int attempt = 0; attempt < 2 && static_cast<int>(batch.size()) < want;
         ++attempt) {
        const std::string response =
            ctx.optimizer->complete(ctx.optimizer->request(user)).text;
        for (auto& p : extract_wrapped(response, "<START>", "<END>")) {
            if (static_cast<int>(batch.size()) < want) {
                batch.push_back(std::move(p));
            }
        }
    }
    if (static_cast<int>(batch.size()) < want) {
        throw Error(fmt::format("initialization query yielded {} prompts, need {}",
                                batch.size(), want));
    }
    return batch;
}

std::vector<Prompt> generate_initial_prompts(std::string_view template_name,
                                             UpdateContext& ctx) {
    const auto& init_split = ctx.dataset->init_split;
    if (init_split.size() < 4) {
        throw DataError(fmt::format("init split has {} examples, need at least 4",
                                    init_split.size()));
    }
    const MetaTemplate& tmpl = ctx.templates->get(std::string(template_name));
    constexpr int kQueries = 2;
    constexpr int kPerQuery = 5;

    std::vector<Prompt> prompts;
    for (int q = 0; q < kQueries; ++q) {
        SubstreamRng rng = ctx.substream("init", static_cast<std::uint64_t>(q));
        std::vector<const Example*> conditioning;
        for (std::size_t idx : rng.sample_without_replacement(init_split.size(), 4)) {
            conditioning.push_back(&init_split[idx]);
        }
        const std::string examples_block =
            render_init_examples(*ctx.templates, conditioning);
        for (auto& text : query_initial_batch(tmpl, examples_block,
                                              ctx.schema->answer_format, kPerQuery,
                                              ctx)) {
            Prompt p;
            p.id = ctx.ids->next_prompt_id(0);
            p.text = std::move(text);
            p.method = Method::kInit;
            p.step = 0;
            prompts.push_back(std::move(p));
        }
    }
    return prompts;
}

std::optional<std::string> write_demo(const Prompt& prompt, const Example& example,
                                      UpdateContext& ctx) {
    const std::string user =
        render(ctx.templates->get("abo_demo"),
               {{"ins", prompt.text}, {"input", render_example_input(example)}});
    auto demo = complete_with_retry(*ctx.optimizer, user, blank, "demonstration");
    if (!demo) {
        return std::nullopt;
    }
    return std::string(trim(*demo));
}

}  // namespace

std::vector<Prompt> initialize_prompts(UpdateContext& ctx) {
    return generate_initial_prompts("init_prompts", ctx);
}

std::vector<Prompt> abo_init(UpdateContext& ctx) {
    std::vector<Prompt> prompts = generate_initial_prompts("abo_init_prompts", ctx);
    const auto& init_split = ctx.dataset->init_split;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        SubstreamRng rng = ctx.substream("abo-demo", i);
        const Example& example = init_split[rng.uniform_index(init_split.size())];
        auto demo = write_demo(prompts[i], example, ctx);
        if (!demo) {
            throw Error(fmt::format("demonstration for initial prompt {} came back empty",
                                    prompts[i].id));
        }
        prompts[i].demo = std::move(*demo);
        prompts[i].method = Method::kAbo;
    }
    return prompts;
}

Expansion abo_update(const Prompt& prompt, const ScoredPrompt& scored, int n,
                     UpdateContext& ctx) {
    Expansion out;
    const MetaTemplate& tmpl = ctx.templates->get("abo_reflection_refinement");
    for (int i = 0; i < n; ++i) {
        const auto errors =
            ctx.reflection_errors(prompt, scored, static_cast<std::uint64_t>(i));
        if (errors.empty()) {
            if (out.children.empty()) {
                out.children.push_back(prompt);
            }
            return out;
        }
        const std::string error_block = render_error_examples(
            *ctx.templates, "apo_error_example", errors, *ctx.schema);
        const std::string user = render(
            tmpl, {{"ins", prompt.text}, {"error_examples", error_block}});
        auto bad = [](const std::string& text) {
            return extract_wrapped(text, "<START>", "<END>").empty();
        };
        auto response = complete_with_retry(*ctx.optimizer, user, bad,
                                            "refined instruction");
        if (!response) {
            continue;
        }
        const std::string refined =
            extract_wrapped(*response, "<START>", "<END>").front();
        const std::string analysis = strip_wrapped(*response, "<START>", "<END>");

        Prompt child = make_child(prompt, refined, Method::kAbo, ctx);
        const Example* demo_example = ctx.dataset->find(errors.front().example_id);
        if (demo_example == nullptr) {
            throw DataError("error sample references unknown example");
        }
        auto demo = write_demo(child, *demo_example, ctx);
        if (!demo) {
            continue;  // a child without its demonstration is no child at all
        }
        child.demo = std::move(*demo);
        out.feedbacks.push_back(make_feedback(prompt, analysis, ctx));
        out.children.push_back(std::move(child));
    }
    return out;
}

Prompt abo_ablate(const Prompt& prompt) {
    if (!prompt.demo) {
        throw Error(fmt::format("prompt {} carries no demonstration to ablate",
                                prompt.id));
    }
    Prompt ablated = prompt;
    ablated.id = prompt.id + "-ablated";
    ablated.demo.reset();
    ablated.demo_stripped = true;
    ablated.system_text = std::string(kAblationSystemPrompt);
    ablated.text = fmt::format("{}\n{}", kAblationInstructionPrefix, prompt.text);
    ablated.parent_id = prompt.id;
    return ablated;
}

}  // namespace promptopt
