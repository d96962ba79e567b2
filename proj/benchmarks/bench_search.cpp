#include <benchmark/benchmark.h>

#include <fmt/format.h>

#include "promptopt/mock_backend.hpp"
#include "promptopt/search.hpp"

namespace {

using namespace promptopt;

LoadedTask make_task(int n_train) {
    LoadedTask task;
    task.dataset.name = "bench";
    task.schema.kind = AnswerKind::kChoice;
    task.schema.answer_format = R"({"answer": "A"} or {"answer": "B"})";
    int counter = 0;
    auto fill = [&](std::vector<Example>& split, int n) {
        for (int i = 0; i < n; ++i, ++counter) {
            Example ex;
            ex.id = fmt::format("bench-{:04}", counter);
            ex.input = fmt::format("Walk {} blocks and return.", counter);
            ex.gold = counter % 2 == 0 ? "A" : "B";
            ex.choices = {{"A", "True"}, {"B", "False"}};
            split.push_back(std::move(ex));
        }
    };
    fill(task.dataset.init_split, 10);
    fill(task.dataset.train_split, n_train);
    fill(task.dataset.test_split, 10);
    return task;
}

std::shared_ptr<MockBackend> make_target() {
    BackendProfile profile;
    profile.model_name = "bench-target";
    profile.rate.max_concurrent = 4;
    auto respond = [](const ChatRequest& req, int) {
        const bool correct = fnv1a(req.user) % 10 < 6;
        return fmt::format("Thinking. {{\"answer\": \"{}\"}}", correct ? "A" : "B");
    };
    return std::make_shared<MockBackend>(
        profile, std::vector<MockRule>{mock_rule_predicate(
                     [](const ChatRequest&) { return true; }, respond)});
}

std::shared_ptr<MockBackend> make_optimizer() {
    BackendProfile profile;
    profile.model_name = "bench-optimizer";
    std::vector<MockRule> rules;
    rules.push_back(mock_rule_generator("Write 5 different instructions",
                                        [](const ChatRequest&, int call) {
                                            std::string out;
                                            for (int k = 0; k < 5; ++k) {
                                                out += fmt::format(
                                                    "<START>instruction {}-{}<END>\n",
                                                    call, k);
                                            }
                                            return out;
                                        }));
    rules.push_back(mock_rule_generator("Generate a variation",
                                        [](const ChatRequest&, int call) {
                                            return fmt::format("variation {}", call);
                                        }));
    return std::make_shared<MockBackend>(profile, std::move(rules));
}

void BM_MockBeamRun(benchmark::State& state) {
    const LoadedTask task = make_task(static_cast<int>(state.range(0)));
    const TemplateLibrary templates = TemplateLibrary::load_default();
    for (auto _ : state) {
        auto optimizer = make_optimizer();
        auto target = make_target();
        RunInputs inputs;
        inputs.config.total_steps = 2;
        inputs.config.seed = 1;
        inputs.method = Method::kApe;
        inputs.dataset = &task.dataset;
        inputs.schema = &task.schema;
        inputs.optimizer = optimizer.get();
        inputs.target = target.get();
        inputs.templates = &templates;
        inputs.run_id = "bench-run";
        benchmark::DoNotOptimize(run(inputs));
    }
}
BENCHMARK(BM_MockBeamRun)->Arg(20)->Arg(50);

void BM_EvaluatePrompt(benchmark::State& state) {
    const LoadedTask task = make_task(50);
    auto target = make_target();
    Prompt prompt;
    prompt.id = "bench-prompt";
    prompt.text = "Decide whether the walk returns.";
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            evaluate_prompt(prompt, task.dataset, Split::kTrain, *target, task.schema));
    }
}
BENCHMARK(BM_EvaluatePrompt);

}  // namespace

BENCHMARK_MAIN();
