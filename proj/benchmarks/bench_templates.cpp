#include <benchmark/benchmark.h>

#include <fmt/format.h>

#include "promptopt/tasks.hpp"
#include "promptopt/templates.hpp"

namespace {

using namespace promptopt;

const TemplateLibrary& library() {
    static TemplateLibrary lib = TemplateLibrary::load_default();
    return lib;
}

std::vector<ErrorExample> make_samples(int n) {
    std::vector<ErrorExample> samples;
    for (int i = 0; i < n; ++i) {
        samples.push_back(ErrorExample{
            fmt::format("e{}", i),
            fmt::format("Take {} steps. Turn around. Take {} steps.\nChoices:\nA. "
                        "True\nB. False",
                        i + 1, i + 1),
            "B", "Walking through it.\n\n{\"answer\": \"A\"}\n\nExplanation: the "
                 "turns cancel out."});
    }
    return samples;
}

void BM_RenderApoReflection(benchmark::State& state) {
    const auto samples = make_samples(4);
    const AnswerSchema schema{AnswerKind::kChoice, false, ""};
    const std::string block =
        render_error_examples(library(), "apo_error_example", samples, schema);
    for (auto _ : state) {
        benchmark::DoNotOptimize(render(
            library().get("apo_reflection"),
            {{"ins", "Decide whether the walk returns to the start."},
             {"error_examples", block}}));
    }
}
BENCHMARK(BM_RenderApoReflection);

void BM_RenderOproWithFullHistory(benchmark::State& state) {
    std::string history;
    for (int i = 0; i < 20; ++i) {
        history += fmt::format("text:\ninstruction number {}\nscore:\n{}\n\n", i,
                               40 + 3 * i);
    }
    const AnswerSchema schema{AnswerKind::kChoice, false, ""};
    const std::string problems =
        render_error_examples(library(), "opro_error_example", make_samples(4), schema);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            render(library().get("opro_prompt_refinement"),
                   {{"prompts_scores", history}, {"error_examples", problems}}));
    }
}
BENCHMARK(BM_RenderOproWithFullHistory);

void BM_ExtractWrapped(benchmark::State& state) {
    std::string text;
    for (int i = 0; i < 8; ++i) {
        text += fmt::format("reasoning block {}\n<START>wrapped item {}<END>\n", i, i);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(extract_wrapped(text, "<START>", "<END>"));
    }
}
BENCHMARK(BM_ExtractWrapped);

void BM_ParseAnswerLongOutput(benchmark::State& state) {
    std::string raw;
    for (int i = 0; i < 50; ++i) {
        raw += fmt::format("Step {}: still thinking about curly {{braces}}.\n", i);
    }
    raw += "{\"answer\": \"17\"}";
    const AnswerSchema schema{AnswerKind::kNumericString, false, ""};
    for (auto _ : state) {
        benchmark::DoNotOptimize(parse_answer(raw, schema, {}));
    }
}
BENCHMARK(BM_ParseAnswerLongOutput);

}  // namespace

BENCHMARK_MAIN();
