#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "promptopt/errors.hpp"
#include "promptopt/search.hpp"
#include "promptopt/trace_io.hpp"
#include "support/run_fixtures.hpp"
#include "support/test_support.hpp"

namespace promptopt {
namespace {

using testing::make_run_fixture;
using testing::RunFixture;

UpdateContext init_context(RunFixture& f, IdAllocator& ids) {
    UpdateContext ctx;
    ctx.optimizer = f.optimizer.get();
    ctx.target = f.target.get();
    ctx.templates = f.inputs.templates;
    ctx.dataset = f.inputs.dataset;
    ctx.schema = f.inputs.schema;
    ctx.seed = f.inputs.config.seed;
    ctx.ids = &ids;
    return ctx;
}

TEST(Initialize, TwoQueriesYieldTenPrompts) {
    RunFixture f = make_run_fixture(Method::kApe, 3);
    IdAllocator ids(3);
    UpdateContext ctx = init_context(f, ids);
    const auto prompts = initialize_prompts(ctx);
    ASSERT_EQ(prompts.size(), 10u);
    std::set<std::string> id_set;
    for (const auto& p : prompts) {
        EXPECT_EQ(p.method, Method::kInit);
        EXPECT_EQ(p.step, 0);
        EXPECT_FALSE(p.parent_id.has_value());
        id_set.insert(p.id);
    }
    EXPECT_EQ(id_set.size(), 10u);
    EXPECT_EQ(f.optimizer->call_count(), 2);
    // each query conditions on four examples and the answer format
    for (const auto& req : f.optimizer->requests()) {
        std::size_t count = 0;
        for (std::size_t pos = req.user.find("## Input"); pos != std::string::npos;
             pos = req.user.find("## Input", pos + 1)) {
            ++count;
        }
        EXPECT_EQ(count, 4u);
        EXPECT_NE(req.user.find(f.task->schema.answer_format), std::string::npos);
    }
}

TEST(Initialize, SmallInitSplitIsRejected) {
    auto task = std::make_shared<LoadedTask>(testing::tiny_choice_task(3, 10, 4));
    RunFixture f = make_run_fixture(Method::kApe, 3, task);
    IdAllocator ids(3);
    UpdateContext ctx = init_context(f, ids);
    EXPECT_THROW(initialize_prompts(ctx), DataError);
}

TEST(Initialize, DuplicateTextsStillGetDistinctIds) {
    RunFixture f = make_run_fixture(Method::kApe, 3);
    // both queries return the same batch
    BackendProfile profile;
    profile.model_name = "mock-optimizer";
    std::string batch;
    for (int k = 0; k < 5; ++k) {
        batch += fmt::format("<START>same instruction {}<END>\n", k);
    }
    auto optimizer = std::make_shared<MockBackend>(
        profile,
        std::vector<MockRule>{mock_rule_fixed("Write 5 different instructions", batch)});
    IdAllocator ids(3);
    UpdateContext ctx = init_context(f, ids);
    ctx.optimizer = optimizer.get();
    const auto prompts = initialize_prompts(ctx);
    ASSERT_EQ(prompts.size(), 10u);
    std::set<std::string> id_set;
    std::set<std::string> texts;
    for (const auto& p : prompts) {
        id_set.insert(p.id);
        texts.insert(p.text);
    }
    EXPECT_EQ(id_set.size(), 10u);
    EXPECT_EQ(texts.size(), 5u);  // duplicates allowed
}

void check_unified_shape(const RunTrace& trace, const BeamConfig& config) {
    ASSERT_EQ(trace.steps.size(), static_cast<std::size_t>(config.total_steps + 1));
    EXPECT_EQ(trace.steps[0].candidates.size(),
              static_cast<std::size_t>(config.initial_size));
    for (const auto& rec : trace.steps) {
        EXPECT_LE(rec.selected.size(),
                  static_cast<std::size_t>(config.selection_size));
        if (rec.step >= 1) {
            EXPECT_EQ(rec.candidates.size(),
                      static_cast<std::size_t>(config.selection_size *
                                               config.expansion_per_prompt))
                << "step " << rec.step;
        }
    }
}

TEST(Run, ApeTraceHasUnifiedShape) {
    RunFixture f = make_run_fixture(Method::kApe, 11);
    const RunTrace trace = run(f.inputs);
    check_unified_shape(trace, f.inputs.config);
    // resampling never writes feedbacks
    for (const auto& rec : trace.steps) {
        EXPECT_TRUE(rec.feedbacks.empty());
    }
}

TEST(Run, ApoTraceRecordsFeedbacks) {
    RunFixture f = make_run_fixture(Method::kApo, 11, nullptr, /*total_steps=*/3);
    const RunTrace trace = run(f.inputs);
    check_unified_shape(trace, f.inputs.config);
    std::size_t feedback_count = 0;
    for (const auto& rec : trace.steps) {
        feedback_count += rec.feedbacks.size();
        for (const auto& fb : rec.feedbacks) {
            EXPECT_EQ(fb.step, rec.step);
            EXPECT_EQ(fb.source, trace.run_id);
        }
    }
    EXPECT_GT(feedback_count, 0u);
}

TEST(Run, SelectionIsMonotoneInScore) {
    RunFixture f = make_run_fixture(Method::kApe, 5, nullptr, 4);
    const RunTrace trace = run(f.inputs);
    std::map<std::string, double> train;
    for (const auto& rec : trace.steps) {
        for (const auto& s : rec.train_scores) {
            train[s.prompt_id] = s.accuracy;
        }
    }
    std::vector<std::string> previous;
    for (const auto& rec : trace.steps) {
        std::set<std::string> pool(previous.begin(), previous.end());
        for (const auto& p : rec.candidates) {
            pool.insert(p.id);
        }
        double worst_selected = 2.0;
        for (const auto& id : rec.selected) {
            worst_selected = std::min(worst_selected, train.at(id));
        }
        for (const auto& id : pool) {
            if (std::find(rec.selected.begin(), rec.selected.end(), id) ==
                rec.selected.end()) {
                EXPECT_LE(train.at(id), worst_selected) << "step " << rec.step;
            }
        }
        previous = rec.selected;
    }
}

TEST(Run, DominantPromptStaysSelected) {
    // one prompt answers everything right except the pinned first example;
    // every other prompt is much worse, so the dominant one survives all steps
    auto task = std::make_shared<LoadedTask>(testing::tiny_choice_task(10, 20, 12));
    RunFixture f = make_run_fixture(Method::kApe, 2, task, 4);

    BackendProfile tgt_profile;
    tgt_profile.model_name = "mock-target";
    tgt_profile.rate.max_concurrent = 4;
    auto respond = [task](const ChatRequest& req, int) -> std::string {
        const bool strong = req.user.find("golden instruction") != std::string::npos;
        const Dataset& d = task->dataset;
        const Example* found = nullptr;
        std::size_t ordinal = 0;
        for (const auto* split : {&d.init_split, &d.train_split, &d.test_split}) {
            for (std::size_t i = 0; i < split->size(); ++i) {
                if (req.user.find((*split)[i].input) != std::string::npos) {
                    found = &(*split)[i];
                    ordinal = i;
                }
            }
        }
        if (found == nullptr) {
            return "lost";
        }
        const bool correct = strong ? ordinal != 0 : ordinal % 4 == 1;
        std::string label = found->gold;
        if (!correct) {
            label = label == "A" ? "B" : "A";
        }
        return fmt::format("{{\"answer\": \"{}\"}}", label);
    };
    auto target = std::make_shared<MockBackend>(
        tgt_profile, std::vector<MockRule>{mock_rule_predicate(
                         [](const ChatRequest&) { return true; }, respond)});

    BackendProfile opt_profile;
    opt_profile.model_name = "mock-optimizer";
    std::vector<MockRule> opt_rules;
    opt_rules.push_back(mock_rule_generator(
        "Write 5 different instructions", [](const ChatRequest&, int call) {
            std::string out;
            for (int k = 0; k < 5; ++k) {
                out += call == 0 && k == 0
                           ? std::string("<START>the golden instruction<END>\n")
                           : fmt::format("<START>weak instruction {}-{}<END>\n", call,
                                         k);
            }
            return out;
        }));
    opt_rules.push_back(mock_rule_generator(
        "Generate a variation", [](const ChatRequest&, int call) {
            return fmt::format("weak variation {}", call);
        }));
    auto optimizer = std::make_shared<MockBackend>(opt_profile, std::move(opt_rules));

    f.inputs.optimizer = optimizer.get();
    f.inputs.target = target.get();
    const RunTrace trace = run(f.inputs);

    const std::string golden_id = trace.steps[0].candidates[0].id;
    ASSERT_EQ(trace.steps[0].candidates[0].text, "the golden instruction");
    for (const auto& rec : trace.steps) {
        EXPECT_NE(std::find(rec.selected.begin(), rec.selected.end(), golden_id),
                  rec.selected.end())
            << "step " << rec.step;
    }
}

TEST(Run, AllTiesSelectByStepThenId) {
    // every prompt scores identically, so selection reduces to the explicit
    // tie-break key; compare against an independently sorted oracle
    auto task = std::make_shared<LoadedTask>(testing::tiny_choice_task(10, 8, 4));
    RunFixture f = make_run_fixture(Method::kApe, 4, task, 2);

    BackendProfile tgt_profile;
    tgt_profile.model_name = "mock-target";
    auto respond = [task](const ChatRequest& req, int) -> std::string {
        const Dataset& d = task->dataset;
        const Example* found = nullptr;
        std::size_t ordinal = 0;
        for (const auto* split : {&d.init_split, &d.train_split, &d.test_split}) {
            for (std::size_t i = 0; i < split->size(); ++i) {
                if (req.user.find((*split)[i].input) != std::string::npos) {
                    found = &(*split)[i];
                    ordinal = i;
                }
            }
        }
        if (found == nullptr) {
            return "lost";
        }
        std::string label = found->gold;
        if (ordinal % 2 == 0) {
            label = label == "A" ? "B" : "A";  // same half-right score for everyone
        }
        return fmt::format("{{\"answer\": \"{}\"}}", label);
    };
    auto target = std::make_shared<MockBackend>(
        tgt_profile, std::vector<MockRule>{mock_rule_predicate(
                         [](const ChatRequest&) { return true; }, respond)});
    f.inputs.target = target.get();

    const RunTrace trace = run(f.inputs);
    std::map<std::string, const Prompt*> prompts;
    for (const auto& rec : trace.steps) {
        for (const auto& p : rec.candidates) {
            prompts.emplace(p.id, &p);
        }
    }
    std::vector<std::string> previous;
    for (const auto& rec : trace.steps) {
        std::set<std::string> pool(previous.begin(), previous.end());
        for (const auto& p : rec.candidates) {
            pool.insert(p.id);
        }
        std::vector<std::string> oracle(pool.begin(), pool.end());
        std::sort(oracle.begin(), oracle.end(),
                  [&](const std::string& a, const std::string& b) {
                      if (prompts.at(a)->step != prompts.at(b)->step) {
                          return prompts.at(a)->step < prompts.at(b)->step;
                      }
                      return a < b;
                  });
        oracle.resize(std::min<std::size_t>(oracle.size(), 5));
        EXPECT_EQ(rec.selected, oracle) << "step " << rec.step;
        previous = rec.selected;
    }
}

TEST(Run, SeededMockRunsAreByteIdentical) {
    testing::TempDir tmp;
    auto run_to_file = [&](const std::string& name) {
        RunFixture f = make_run_fixture(Method::kApoSum, 21, nullptr, 3);
        RunTrace meta;
        meta.run_id = f.inputs.run_id;
        meta.task_name = f.task->dataset.name;
        meta.method = f.inputs.method;
        meta.config = f.inputs.config;
        TraceWriter writer(tmp.file(name), trace_header(meta));
        run(f.inputs, &writer);
        return testing::slurp(tmp.file(name));
    };
    EXPECT_EQ(run_to_file("a.jsonl"), run_to_file("b.jsonl"));
}

TEST(Run, CurveIsNondecreasing) {
    RunFixture f = make_run_fixture(Method::kPromptAgent, 13, nullptr, 3);
    const RunTrace trace = run(f.inputs);
    const auto curve = max_test_score_curve(trace);
    EXPECT_TRUE(std::is_sorted(curve.begin(), curve.end()));
    EXPECT_EQ(curve.size(), trace.steps.size());
}

TEST(Run, EmptyExpansionAbortsWithPartialTrace) {
    RunFixture f = make_run_fixture(Method::kApe, 9, nullptr, 3);
    BackendProfile profile;
    profile.model_name = "mock-optimizer";
    std::vector<MockRule> rules;
    rules.push_back(mock_rule_generator("Write 5 different instructions",
                                        [](const ChatRequest&, int call) {
                                            std::string out;
                                            for (int k = 0; k < 5; ++k) {
                                                out += fmt::format(
                                                    "<START>init {}-{}<END>\n", call, k);
                                            }
                                            return out;
                                        }));
    rules.push_back(mock_rule_fixed("Generate a variation", "   "));  // always empty
    auto optimizer = std::make_shared<MockBackend>(profile, std::move(rules));
    f.inputs.optimizer = optimizer.get();

    testing::TempDir tmp;
    RunTrace meta;
    meta.run_id = f.inputs.run_id;
    meta.method = f.inputs.method;
    meta.config = f.inputs.config;
    TraceWriter writer(tmp.file("partial.jsonl"), trace_header(meta));
    EXPECT_THROW(run(f.inputs, &writer), RunAborted);
    const LoadedTrace persisted = read_trace(tmp.file("partial.jsonl"));
    EXPECT_EQ(persisted.trace.steps.size(), 1u);  // step 0 survived
}

TEST(ResumeWith, SeamSelectionMatchesSourceStep) {
    RunFixture f = make_run_fixture(Method::kApo, 31, nullptr, 3);
    const RunTrace source = run(f.inputs);

    for (int from_step : {0, 1, 2}) {
        RunFixture g = make_run_fixture(Method::kApe, 31, f.task, 2);
        g.inputs.run_id = fmt::format("{}+s{}-ape", source.run_id, from_step);
        const RunTrace resumed =
            resume_with(source, from_step, Method::kApe, 2, g.inputs);

        ASSERT_FALSE(resumed.steps.empty());
        const std::set<std::string> seam(resumed.steps[0].selected.begin(),
                                         resumed.steps[0].selected.end());
        const std::set<std::string> expected(source.steps[from_step].selected.begin(),
                                             source.steps[from_step].selected.end());
        EXPECT_EQ(seam, expected) << "from_step " << from_step;
        ASSERT_TRUE(resumed.seam.has_value());
        EXPECT_EQ(resumed.seam->source_run_id, source.run_id);
        EXPECT_EQ(resumed.seam->from_step, from_step);
        EXPECT_EQ(resumed.method, Method::kApe);
        EXPECT_EQ(resumed.steps.size(), 3u);

        // children reference seam prompts, preserving lineage across traces
        for (const auto& p : resumed.steps[1].candidates) {
            ASSERT_TRUE(p.parent_id.has_value());
            EXPECT_TRUE(seam.count(*p.parent_id)) << *p.parent_id;
        }
    }
}

TEST(ResumeWith, OutOfRangeStepIsRejected) {
    RunFixture f = make_run_fixture(Method::kApe, 31, nullptr, 2);
    const RunTrace source = run(f.inputs);
    RunFixture g = make_run_fixture(Method::kApe, 31, f.task, 2);
    EXPECT_THROW(resume_with(source, 5, Method::kApe, 2, g.inputs), TraceError);
    EXPECT_THROW(resume_with(source, -1, Method::kApe, 2, g.inputs), TraceError);
}

TEST(ResumeWith, SeamScoresAreCarriedNotRecomputed) {
    RunFixture f = make_run_fixture(Method::kApe, 8, nullptr, 2);
    const RunTrace source = run(f.inputs);

    RunFixture g = make_run_fixture(Method::kApe, 8, f.task, 1);
    // a variation stem that cannot collide with any source candidate text,
    // so the request scan below cleanly separates new children from seam
    // prompts
    BackendProfile opt_profile;
    opt_profile.model_name = "mock-optimizer";
    auto resumed_optimizer = std::make_shared<MockBackend>(
        opt_profile,
        std::vector<MockRule>{mock_rule_generator(
            "Generate a variation", [](const ChatRequest&, int call) {
                return fmt::format("Post-seam rework {} in the required format.",
                                   call);
            })});
    g.inputs.optimizer = resumed_optimizer.get();
    const RunTrace resumed = resume_with(source, 1, Method::kApe, 1, g.inputs);
    // step 0 of the resumed trace reuses recorded evaluations
    std::map<std::string, double> source_train;
    std::map<std::string, const Prompt*> source_prompts;
    for (const auto& rec : source.steps) {
        for (const auto& s : rec.train_scores) {
            source_train[s.prompt_id] = s.accuracy;
        }
        for (const auto& p : rec.candidates) {
            source_prompts.emplace(p.id, &p);
        }
    }
    for (const auto& s : resumed.steps[0].train_scores) {
        EXPECT_DOUBLE_EQ(s.accuracy, source_train.at(s.prompt_id));
    }
    // no target request ever re-evaluates a seam prompt
    for (const auto& id : resumed.steps[0].selected) {
        const std::string& seam_text = source_prompts.at(id)->text;
        for (const auto& req : g.target->requests()) {
            EXPECT_EQ(req.user.find(seam_text), std::string::npos);
        }
    }
}

TEST(Run, OproHistoryDrivesChildren) {
    RunFixture f = make_run_fixture(Method::kOpro, 17, nullptr, 3);
    const RunTrace trace = run(f.inputs);
    check_unified_shape(trace, f.inputs.config);
    for (const auto& rec : trace.steps) {
        EXPECT_TRUE(rec.feedbacks.empty());  // implicit reflection: no feedback text
        if (rec.step >= 1) {
            for (const auto& p : rec.candidates) {
                EXPECT_EQ(p.method, Method::kOpro);
                ASSERT_TRUE(p.parent_id.has_value());
            }
        }
    }
    // every optimizer call past initialization carries the score block
    int history_calls = 0;
    for (const auto& req : f.optimizer->requests()) {
        if (req.user.find("The score ranges from 0 to 100.") != std::string::npos) {
            ++history_calls;
            EXPECT_NE(req.user.find("text:\n"), std::string::npos);
        }
    }
    EXPECT_EQ(history_calls, 3 * 10);
}

TEST(Run, TestBestOnlyScoresOnePromptPerStep) {
    RunFixture f = make_run_fixture(Method::kApe, 3, nullptr, 2);
    f.inputs.test_best_only = true;
    const RunTrace trace = run(f.inputs);
    for (const auto& rec : trace.steps) {
        ASSERT_EQ(rec.test_scores.size(), 1u);
        EXPECT_EQ(rec.test_scores[0].prompt_id, rec.selected.front());
    }
}

TEST(Run, AboRunAttachesDemosEverywhere) {
    RunFixture f = make_run_fixture(Method::kAbo, 23, nullptr, 2);
    const RunTrace trace = run(f.inputs);
    check_unified_shape(trace, f.inputs.config);
    for (const auto& rec : trace.steps) {
        for (const auto& p : rec.candidates) {
            EXPECT_EQ(p.method, Method::kAbo);
            EXPECT_TRUE(p.demo.has_value()) << p.id << " at step " << rec.step;
        }
    }
}

}  // namespace
}  // namespace promptopt
