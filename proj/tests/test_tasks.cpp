#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "promptopt/errors.hpp"
#include "promptopt/mock_backend.hpp"
#include "promptopt/tasks.hpp"
#include "support/test_support.hpp"

namespace promptopt {
namespace {

using nlohmann::json;
using testing::TempDir;

TEST(LoadDataset, ObjectCountingSplits) {
    const LoadedTask task = load_dataset(testing::data_dir() / "object_counting.json");
    EXPECT_EQ(task.dataset.init_split.size(), 10u);
    EXPECT_EQ(task.dataset.train_split.size(), 50u);
    EXPECT_EQ(task.dataset.test_split.size(), 200u);
    EXPECT_EQ(task.schema.kind, AnswerKind::kNumericString);
    EXPECT_FALSE(task.schema.answer_format.empty());
}

TEST(LoadDataset, SnarksSplits) {
    const LoadedTask task = load_dataset(testing::data_dir() / "snarks.json");
    EXPECT_EQ(task.dataset.init_split.size(), 10u);
    EXPECT_EQ(task.dataset.train_split.size(), 50u);
    EXPECT_EQ(task.dataset.test_split.size(), 106u);
    EXPECT_EQ(task.schema.kind, AnswerKind::kChoice);
}

TEST(LoadDataset, IdsAreUniqueAcrossSplits) {
    const LoadedTask task = load_dataset(testing::data_dir() / "navigate.json");
    std::set<std::string> ids;
    for (const auto* split : {&task.dataset.init_split, &task.dataset.train_split,
                              &task.dataset.test_split}) {
        for (const auto& ex : *split) {
            EXPECT_TRUE(ids.insert(ex.id).second) << ex.id;
        }
    }
}

TEST(LoadDataset, MissingGoldNamesRecordIndex) {
    TempDir tmp;
    json manifest{{"name", "broken"},
                  {"schema", {{"kind", "choice"}}},
                  {"splits", {{"init", 0}, {"train", 2}, {"test", 0}}},
                  {"records",
                   json::array({json{{"input", "q1"},
                                     {"gold", "A"},
                                     {"choices", json::array({json{{"label", "A"}, {"text", "x"}},
                                                              json{{"label", "B"}, {"text", "y"}}})}},
                                json{{"input", "q2"}}})}};
    std::ofstream(tmp.file("broken.json")) << manifest.dump();
    try {
        load_dataset(tmp.file("broken.json"));
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos);
    }
}

TEST(LoadDataset, DuplicateIdsRejected) {
    TempDir tmp;
    json manifest{{"name", "dup"},
                  {"schema", {{"kind", "numeric_string"}}},
                  {"splits", {{"init", 0}, {"train", 2}, {"test", 0}}},
                  {"records",
                   json::array({json{{"id", "same"}, {"input", "a"}, {"gold", "1"}},
                                json{{"id", "same"}, {"input", "b"}, {"gold", "2"}}})}};
    std::ofstream(tmp.file("dup.json")) << manifest.dump();
    EXPECT_THROW(load_dataset(tmp.file("dup.json")), DataError);
}

const std::vector<Choice> kAB = {{"A", "True"}, {"B", "False"}};

TEST(ParseAnswer, ExtractsEnvelope) {
    AnswerSchema schema{AnswerKind::kChoice, false, ""};
    const ParsedAnswer p = parse_answer("Sure thing. {\"answer\": \"A\"}", schema, kAB);
    ASSERT_TRUE(p.answer.has_value());
    EXPECT_EQ(*p.answer, "A");
    EXPECT_FALSE(p.format_error);
}

TEST(ParseAnswer, StrictModeRejectsBareLabels) {
    AnswerSchema schema{AnswerKind::kChoice, false, ""};
    const ParsedAnswer p =
        parse_answer("Output: B. False ... so the answer is B. False.", schema, kAB);
    EXPECT_TRUE(p.format_error);
    EXPECT_FALSE(p.answer.has_value());
}

TEST(ParseAnswer, FallbackAcceptsBareFinalLabel) {
    AnswerSchema schema{AnswerKind::kChoice, true, ""};
    const ParsedAnswer p =
        parse_answer("Output: B. False ... so the answer is B. False.", schema, kAB);
    ASSERT_TRUE(p.answer.has_value());
    EXPECT_EQ(*p.answer, "B");
}

TEST(ParseAnswer, LastEnvelopeWins) {
    AnswerSchema schema{AnswerKind::kNumericString, false, ""};
    const ParsedAnswer p = parse_answer(
        "First guess {\"answer\": \"7\"} but recounting gives {\"answer\": \"3\"}.",
        schema, {});
    ASSERT_TRUE(p.answer.has_value());
    EXPECT_EQ(*p.answer, "3");
}

// Oracle: scan for every envelope with a regex and keep the final one.
TEST(ParseAnswer, AgreesWithScanAllOracle) {
    AnswerSchema schema{AnswerKind::kNumericString, false, ""};
    SubstreamRng rng(5, "parse-oracle");
    for (int round = 0; round < 200; ++round) {
        std::string text;
        std::vector<std::string> planted;
        const int pieces = 1 + static_cast<int>(rng.uniform_index(5));
        for (int i = 0; i < pieces; ++i) {
            switch (rng.uniform_index(4)) {
                case 0:
                    text += "some reasoning text ";
                    break;
                case 1:
                    text += "{\"answer\": broken ";
                    break;
                case 2:
                    text += "{\"other\": \"5\"} ";
                    break;
                default: {
                    const std::string v = std::to_string(rng.uniform_index(50));
                    planted.push_back(v);
                    text += "{\"answer\": \"" + v + "\"} ";
                }
            }
        }
        const ParsedAnswer parsed = parse_answer(text, schema, {});
        if (planted.empty()) {
            EXPECT_TRUE(parsed.format_error) << text;
        } else {
            ASSERT_TRUE(parsed.answer.has_value()) << text;
            EXPECT_EQ(*parsed.answer, planted.back()) << text;
        }
    }
}

TEST(RenderTargetMessage, UsesInputOutputFraming) {
    const LoadedTask task = testing::tiny_choice_task();
    const Prompt prompt = testing::make_prompt("p", "Decide if the walk returns.");
    const std::string msg =
        render_target_user_message(prompt, task.dataset.train_split[0]);
    EXPECT_EQ(msg.find("Decide if the walk returns.\n\n## Input\n"), 0u);
    EXPECT_NE(msg.find("Choices:\nA. True\nB. False"), std::string::npos);
    EXPECT_NE(msg.find("\n## Output\n"), std::string::npos);
}

std::shared_ptr<MockBackend> answering_target(const LoadedTask& task,
                                              int wrong_among_first_n = 0) {
    BackendProfile profile;
    profile.model_name = "mock-target";
    std::vector<MockRule> rules;
    int index = 0;
    for (const auto& ex : task.dataset.train_split) {
        const bool wrong = index < wrong_among_first_n;
        std::string label = ex.gold;
        if (wrong) {
            label = ex.gold == "A" ? "B" : "A";
        }
        rules.push_back(mock_rule_fixed(
            ex.input, fmt::format("Reasoning... {{\"answer\": \"{}\"}}", label)));
        ++index;
    }
    return std::make_shared<MockBackend>(profile, std::move(rules));
}

TEST(EvaluatePrompt, AllCorrectGivesFullAccuracy) {
    const LoadedTask task = testing::tiny_choice_task(4, 50, 6);
    auto target = answering_target(task, 0);
    const Prompt prompt = testing::make_prompt("p", "Answer correctly.");
    const ScoredPrompt scored =
        evaluate_prompt(prompt, task.dataset, Split::kTrain, *target, task.schema);
    EXPECT_DOUBLE_EQ(scored.accuracy, 1.0);
    EXPECT_EQ(scored.outcomes.size(), 50u);
}

TEST(EvaluatePrompt, AllWrongGivesZeroWithFiftyErrorOutcomes) {
    const LoadedTask task = testing::tiny_choice_task(4, 50, 6);
    auto target = answering_target(task, 50);
    const Prompt prompt = testing::make_prompt("p", "Answer.");
    const ScoredPrompt scored =
        evaluate_prompt(prompt, task.dataset, Split::kTrain, *target, task.schema);
    EXPECT_DOUBLE_EQ(scored.accuracy, 0.0);
    EXPECT_EQ(std::count_if(scored.outcomes.begin(), scored.outcomes.end(),
                            [](const EvalOutcome& o) { return !o.correct; }),
              50);
}

TEST(EvaluatePrompt, PartialFixtureScoresSixtyEight) {
    const LoadedTask task = testing::tiny_choice_task(4, 50, 6);
    auto target = answering_target(task, 16);  // 34 of 50 correct
    const Prompt prompt = testing::make_prompt("p", "Answer.");
    const ScoredPrompt scored =
        evaluate_prompt(prompt, task.dataset, Split::kTrain, *target, task.schema);
    EXPECT_DOUBLE_EQ(scored.accuracy, 0.68);
}

TEST(EvaluatePrompt, AccuracyMatchesIndependentRecount) {
    const LoadedTask task = testing::tiny_choice_task(4, 50, 6);
    auto target = answering_target(task, 13);
    const Prompt prompt = testing::make_prompt("p", "Answer.");
    const ScoredPrompt scored =
        evaluate_prompt(prompt, task.dataset, Split::kTrain, *target, task.schema);
    double recount = 0;
    for (const auto& o : scored.outcomes) {
        recount += o.correct ? 1.0 : 0.0;
    }
    EXPECT_DOUBLE_EQ(scored.accuracy, recount / scored.outcomes.size());
    // outcomes keep example order
    for (std::size_t i = 0; i < scored.outcomes.size(); ++i) {
        EXPECT_EQ(scored.outcomes[i].example_id, task.dataset.train_split[i].id);
    }
}

TEST(EvaluatePrompt, TransportErrorsCarryExampleId) {
    const LoadedTask task = testing::tiny_choice_task(4, 5, 2);
    BackendProfile profile;
    profile.model_name = "mock";
    auto target = std::make_shared<MockBackend>(profile, std::vector<MockRule>{});
    const Prompt prompt = testing::make_prompt("p", "Answer.");
    try {
        evaluate_prompt(prompt, task.dataset, Split::kTrain, *target, task.schema);
        FAIL() << "expected Error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("tiny-"), std::string::npos);
    }
}

ScoredPrompt scored_with_errors(const LoadedTask& task, int wrong_count) {
    auto target = answering_target(task, wrong_count);
    const Prompt prompt = testing::make_prompt("p", "Answer.");
    return evaluate_prompt(prompt, task.dataset, Split::kTrain, *target, task.schema);
}

TEST(SampleErrors, DeterministicAndDistinct) {
    const LoadedTask task = testing::tiny_choice_task(4, 50, 6);
    const ScoredPrompt scored = scored_with_errors(task, 10);
    SubstreamRng rng1(3, "error-sample", 1, 0);
    SubstreamRng rng2(3, "error-sample", 1, 0);
    const auto a = sample_errors(scored, task.dataset, 4, rng1);
    const auto b = sample_errors(scored, task.dataset, 4, rng2);
    ASSERT_EQ(a.size(), 4u);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].example_id, b[i].example_id);
        ids.insert(a[i].example_id);
    }
    EXPECT_EQ(ids.size(), 4u);
}

TEST(SampleErrors, ReturnsAllWhenFewerThanK) {
    const LoadedTask task = testing::tiny_choice_task(4, 50, 6);
    const ScoredPrompt scored = scored_with_errors(task, 2);
    SubstreamRng rng(3, "error-sample");
    EXPECT_EQ(sample_errors(scored, task.dataset, 4, rng).size(), 2u);
}

TEST(SampleErrors, ZeroErrorsYieldEmpty) {
    const LoadedTask task = testing::tiny_choice_task(4, 50, 6);
    const ScoredPrompt scored = scored_with_errors(task, 0);
    SubstreamRng rng(3, "error-sample");
    EXPECT_TRUE(sample_errors(scored, task.dataset, 4, rng).empty());
}

TEST(SampleErrors, SamplesOnlyWrongOutcomesUniformly) {
    // exhaustive small case: 5 errors, draw 2, check support and uniformity
    // against a brute-force enumeration over many seeds
    const LoadedTask task = testing::tiny_choice_task(4, 10, 2);
    const ScoredPrompt scored = scored_with_errors(task, 5);
    std::set<std::string> wrong_ids;
    for (const auto& o : scored.outcomes) {
        if (!o.correct) {
            wrong_ids.insert(o.example_id);
        }
    }
    std::map<std::string, int> first_pick_counts;
    const int trials = 4000;
    for (int seed = 0; seed < trials; ++seed) {
        SubstreamRng rng(seed, "uniformity");
        const auto sample = sample_errors(scored, task.dataset, 2, rng);
        ASSERT_EQ(sample.size(), 2u);
        for (const auto& e : sample) {
            ASSERT_TRUE(wrong_ids.count(e.example_id)) << e.example_id;
        }
        EXPECT_NE(sample[0].example_id, sample[1].example_id);
        ++first_pick_counts[sample[0].example_id];
    }
    for (const auto& id : wrong_ids) {
        const double freq = first_pick_counts[id] / static_cast<double>(trials);
        EXPECT_NEAR(freq, 0.2, 0.03) << id;  // 5 candidates, uniform first draw
    }
}

TEST(FlipPredictions, BinaryComplement) {
    const LoadedTask task = testing::tiny_choice_task(4, 20, 4);
    const ScoredPrompt scored = scored_with_errors(task, 8);  // accuracy 0.6
    ASSERT_DOUBLE_EQ(scored.accuracy, 0.6);
    SubstreamRng rng(11, "flip");
    const auto pseudo = flip_predictions(scored, task.dataset, task.schema, rng);
    ASSERT_EQ(pseudo.size(), scored.outcomes.size());
    int pseudo_correct = 0;
    for (std::size_t i = 0; i < pseudo.size(); ++i) {
        EXPECT_EQ(pseudo[i].correct, !scored.outcomes[i].correct);
        ASSERT_TRUE(pseudo[i].flipped.has_value());
        EXPECT_TRUE(*pseudo[i].flipped);
        pseudo_correct += pseudo[i].correct ? 1 : 0;
        // the explanation text around the envelope survives
        EXPECT_EQ(pseudo[i].raw_output.find("Reasoning... "), 0u);
    }
    EXPECT_DOUBLE_EQ(pseudo_correct / 20.0, 0.4);
}

TEST(FlipPredictions, FormatErrorsPassThroughFlagged) {
    const LoadedTask task = testing::tiny_choice_task(4, 3, 2);
    BackendProfile profile;
    profile.model_name = "mock";
    std::vector<MockRule> rules;
    rules.push_back(mock_rule_fixed(task.dataset.train_split[0].input, "no envelope"));
    for (int i = 1; i < 3; ++i) {
        rules.push_back(mock_rule_fixed(
            task.dataset.train_split[i].input,
            fmt::format("{{\"answer\": \"{}\"}}", task.dataset.train_split[i].gold)));
    }
    MockBackend target(profile, std::move(rules));
    const ScoredPrompt scored =
        evaluate_prompt(testing::make_prompt("p", "x"), task.dataset, Split::kTrain,
                        target, task.schema);
    SubstreamRng rng(1, "flip");
    const auto pseudo = flip_predictions(scored, task.dataset, task.schema, rng);
    ASSERT_TRUE(pseudo[0].format_error);
    ASSERT_TRUE(pseudo[0].flipped.has_value());
    EXPECT_FALSE(*pseudo[0].flipped);
    EXPECT_EQ(pseudo[0].raw_output, "no envelope");
}

TEST(FlipPredictions, NumericRerunsAreIdentical) {
    const LoadedTask task = testing::tiny_numeric_task(4, 12, 4);
    BackendProfile profile;
    profile.model_name = "mock";
    std::vector<MockRule> rules;
    int index = 0;
    for (const auto& ex : task.dataset.train_split) {
        const std::string value =
            index++ % 3 == 0 ? std::to_string(std::stoi(ex.gold) + 1) : ex.gold;
        rules.push_back(mock_rule_fixed(
            ex.input, fmt::format("count... {{\"answer\": \"{}\"}}", value)));
    }
    MockBackend target(profile, std::move(rules));
    const ScoredPrompt scored =
        evaluate_prompt(testing::make_prompt("p", "x"), task.dataset, Split::kTrain,
                        target, task.schema);

    SubstreamRng rng1(21, "flip");
    SubstreamRng rng2(21, "flip");
    const auto a = flip_predictions(scored, task.dataset, task.schema, rng1);
    const auto b = flip_predictions(scored, task.dataset, task.schema, rng2);
    ASSERT_EQ(a.size(), b.size());
    std::set<std::string> observed_golds;
    for (const auto& ex : task.dataset.train_split) {
        observed_golds.insert(ex.gold);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].raw_output, b[i].raw_output);
        ASSERT_TRUE(a[i].parsed_answer.has_value());
        // replacement values come from the observed gold range
        EXPECT_TRUE(observed_golds.count(*a[i].parsed_answer)) << *a[i].parsed_answer;
        EXPECT_NE(*a[i].parsed_answer, *scored.outcomes[i].parsed_answer);
    }
}

TEST(SamplePseudoErrors, DrawsFromFlippedWrongOutcomes) {
    const LoadedTask task = testing::tiny_choice_task(4, 20, 4);
    const ScoredPrompt scored = scored_with_errors(task, 8);
    SubstreamRng flip_rng(11, "flip");
    const auto pseudo = flip_predictions(scored, task.dataset, task.schema, flip_rng);
    SubstreamRng rng(11, "pseudo-sample");
    const auto sample = sample_pseudo_errors(pseudo, task.dataset, 4, rng);
    ASSERT_EQ(sample.size(), 4u);
    std::set<std::string> pseudo_wrong;
    for (const auto& o : pseudo) {
        if (!o.correct) {
            pseudo_wrong.insert(o.example_id);
        }
    }
    for (const auto& e : sample) {
        EXPECT_TRUE(pseudo_wrong.count(e.example_id));
    }
}

}  // namespace
}  // namespace promptopt
