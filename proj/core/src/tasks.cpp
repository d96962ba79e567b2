#include "promptopt/tasks.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "promptopt/errors.hpp"
#include "promptopt/strings.hpp"

namespace promptopt {

using nlohmann::json;

LoadedTask load_dataset(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) {
        throw DataError(fmt::format("cannot open manifest {}", manifest_path.string()));
    }
    json m;
    try {
        in >> m;
    } catch (const json::exception& ex) {
        throw DataError(fmt::format("manifest {}: {}", manifest_path.string(), ex.what()));
    }

    LoadedTask task;
    task.dataset.name = m.at("name").get<std::string>();

    const json& schema = m.at("schema");
    const std::string kind = schema.at("kind").get<std::string>();
    if (kind == "choice") {
        task.schema.kind = AnswerKind::kChoice;
    } else if (kind == "numeric_string") {
        task.schema.kind = AnswerKind::kNumericString;
    } else {
        throw DataError(fmt::format("schema.kind: unknown kind \"{}\"", kind));
    }
    task.schema.bare_token_fallback = schema.value("bare_token_fallback", false);
    task.schema.answer_format = schema.value("answer_format", "");

    const json& splits = m.at("splits");
    const int n_init = splits.at("init").get<int>();
    const int n_train = splits.at("train").get<int>();
    const int n_test = splits.at("test").get<int>();
    const json& records = m.at("records");
    if (static_cast<int>(records.size()) != n_init + n_train + n_test) {
        throw DataError(fmt::format("manifest declares {} records but carries {}",
                                    n_init + n_train + n_test, records.size()));
    }

    std::set<std::string> seen_ids;
    int index = 0;
    for (const auto& rec : records) {
        Example ex;
        if (!rec.contains("input") || !rec.at("input").is_string()) {
            throw DataError(fmt::format("record {}: missing input", index));
        }
        if (!rec.contains("gold") || !rec.at("gold").is_string() ||
            rec.at("gold").get<std::string>().empty()) {
            throw DataError(fmt::format("record {}: missing gold", index));
        }
        ex.input = rec.at("input").get<std::string>();
        ex.gold = rec.at("gold").get<std::string>();
        ex.id = rec.contains("id") ? rec.at("id").get<std::string>()
                                   : fmt::format("{}-{:04}", task.dataset.name, index);
        if (!seen_ids.insert(ex.id).second) {
            throw DataError(fmt::format("record {}: duplicate id {}", index, ex.id));
        }
        if (rec.contains("choices")) {
            for (const auto& c : rec.at("choices")) {
                ex.choices.push_back(Choice{c.at("label").get<std::string>(),
                                            c.at("text").get<std::string>()});
            }
            bool gold_is_label = false;
            for (const auto& c : ex.choices) {
                gold_is_label = gold_is_label || c.label == ex.gold;
            }
            if (!gold_is_label) {
                throw DataError(fmt::format("record {}: gold \"{}\" is not a choice label",
                                            index, ex.gold));
            }
        }
        if (index < n_init) {
            task.dataset.init_split.push_back(std::move(ex));
        } else if (index < n_init + n_train) {
            task.dataset.train_split.push_back(std::move(ex));
        } else {
            task.dataset.test_split.push_back(std::move(ex));
        }
        ++index;
    }
    return task;
}

namespace {

struct EnvelopeMatch {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string value;
};

// Matches one {"answer": "<value>"} envelope starting at raw[pos] == '{'.
std::optional<EnvelopeMatch> match_envelope_at(const std::string& raw, std::size_t pos) {
    auto skip_ws = [&](std::size_t i) {
        while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) {
            ++i;
        }
        return i;
    };
    std::size_t i = skip_ws(pos + 1);
    constexpr std::string_view kKey = "\"answer\"";
    if (raw.compare(i, kKey.size(), kKey) != 0) {
        return std::nullopt;
    }
    i = skip_ws(i + kKey.size());
    if (i >= raw.size() || raw[i] != ':') {
        return std::nullopt;
    }
    i = skip_ws(i + 1);
    if (i >= raw.size() || raw[i] != '"') {
        return std::nullopt;
    }
    ++i;
    std::string value;
    while (i < raw.size() && raw[i] != '"') {
        if (raw[i] == '\\' && i + 1 < raw.size()) {
            ++i;
        }
        value.push_back(raw[i]);
        ++i;
    }
    if (i >= raw.size()) {
        return std::nullopt;
    }
    i = skip_ws(i + 1);
    if (i >= raw.size() || raw[i] != '}') {
        return std::nullopt;
    }
    return EnvelopeMatch{pos, i + 1, std::move(value)};
}

std::optional<EnvelopeMatch> last_envelope(const std::string& raw) {
    std::optional<EnvelopeMatch> last;
    for (std::size_t pos = raw.find('{'); pos != std::string::npos;
         pos = raw.find('{', pos + 1)) {
        if (auto m = match_envelope_at(raw, pos)) {
            last = std::move(m);
        }
    }
    return last;
}

std::optional<std::string> canonical_label(std::string_view value,
                                           const std::vector<Choice>& choices) {
    const std::string_view v = trim(value);
    for (const auto& c : choices) {
        if (iequals(v, c.label)) {
            return c.label;
        }
    }
    return std::nullopt;
}

// Fallback: the last bare "A." / "B" style token matching a choice label.
std::optional<std::string> scan_bare_token(const std::string& raw,
                                           const std::vector<Choice>& choices) {
    std::optional<std::string> found;
    std::size_t found_pos = 0;
    for (const auto& c : choices) {
        const std::regex pattern("(^|[\\s(\"'])(" + c.label + ")([.)\\s:,\"']|$)",
                                 std::regex::icase);
        for (auto it = std::sregex_iterator(raw.begin(), raw.end(), pattern);
             it != std::sregex_iterator(); ++it) {
            const std::size_t pos = static_cast<std::size_t>(it->position(2));
            if (!found || pos >= found_pos) {
                found = c.label;
                found_pos = pos;
            }
        }
    }
    return found;
}

bool is_integer(std::string_view s) {
    s = trim(s);
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
        s.remove_prefix(1);
    }
    if (s.empty()) {
        return false;
    }
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isdigit(c); });
}

}  // namespace

ParsedAnswer parse_answer(const std::string& raw, const AnswerSchema& schema,
                          const std::vector<Choice>& choices) {
    ParsedAnswer result;
    if (auto m = last_envelope(raw)) {
        result.answer = m->value;
        result.format_error = false;
        result.span_begin = m->begin;
        result.span_end = m->end;
        return result;
    }
    if (schema.bare_token_fallback && schema.kind == AnswerKind::kChoice) {
        if (auto token = scan_bare_token(raw, choices)) {
            result.answer = *token;
            result.format_error = false;
            return result;
        }
    }
    return result;  // format error; failure is data, not an exception
}

bool answers_match(const std::string& parsed, const std::string& gold,
                   const AnswerSchema& schema) {
    if (schema.kind == AnswerKind::kChoice) {
        return iequals(trim(parsed), trim(gold));
    }
    if (is_integer(parsed) && is_integer(gold)) {
        return std::stoll(std::string(trim(parsed))) ==
               std::stoll(std::string(trim(gold)));
    }
    return trim(parsed) == trim(gold);
}

std::string render_example_input(const Example& ex) {
    if (ex.choices.empty()) {
        return ex.input;
    }
    std::string out = ex.input + "\nChoices:";
    for (const auto& c : ex.choices) {
        out += fmt::format("\n{}. {}", c.label, c.text);
    }
    return out;
}

std::string render_target_user_message(const Prompt& prompt, const Example& ex) {
    return fmt::format("{}\n\n## Input\n{}\n## Output\n", prompt.full_text(),
                       render_example_input(ex));
}

ScoredPrompt evaluate_prompt(const Prompt& prompt, const Dataset& dataset,
                             Split split, Backend& target,
                             const AnswerSchema& schema) {
    const std::vector<Example>& examples = dataset.split(split);
    if (examples.empty()) {
        throw DataError(fmt::format("{} split of {} is empty", to_string(split),
                                    dataset.name));
    }

    std::vector<EvalOutcome> outcomes(examples.size());
    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= examples.size() || failed.load()) {
                return;
            }
            const Example& ex = examples[i];
            try {
                ChatRequest req = target.request(render_target_user_message(prompt, ex),
                                                 prompt.system_text);
                Completion completion = target.complete(req);
                EvalOutcome out;
                out.example_id = ex.id;
                out.raw_output = completion.text;
                ParsedAnswer parsed = parse_answer(completion.text, schema, ex.choices);
                out.format_error = parsed.format_error;
                if (parsed.answer) {
                    if (schema.kind == AnswerKind::kChoice) {
                        auto canon = canonical_label(*parsed.answer, ex.choices);
                        out.parsed_answer = canon ? *canon : *parsed.answer;
                    } else {
                        out.parsed_answer = *parsed.answer;
                    }
                    out.correct = answers_match(*out.parsed_answer, ex.gold, schema);
                }
                outcomes[i] = std::move(out);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    try {
                        throw;
                    } catch (const std::exception& ex_err) {
                        error = std::make_exception_ptr(Error(fmt::format(
                            "example {}: {}", ex.id, ex_err.what())));
                    }
                }
                failed.store(true);
                return;
            }
        }
    };

    const int limit = target.profile().rate.max_concurrent;
    const std::size_t n_workers =
        std::min<std::size_t>(examples.size(),
                              static_cast<std::size_t>(std::max(1, limit)));
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t i = 0; i < n_workers; ++i) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }

    ScoredPrompt scored;
    scored.prompt_id = prompt.id;
    scored.split = split;
    scored.outcomes = std::move(outcomes);
    scored.accuracy = compute_accuracy(scored.outcomes);
    return scored;
}

namespace {

std::vector<ErrorExample> sample_error_outcomes(const std::vector<EvalOutcome>& outcomes,
                                                const Dataset& dataset, int k,
                                                SubstreamRng& rng) {
    std::vector<std::size_t> error_indices;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i].correct) {
            error_indices.push_back(i);
        }
    }
    std::vector<ErrorExample> out;
    if (error_indices.empty() || k <= 0) {
        return out;
    }
    for (std::size_t pick : rng.sample_without_replacement(
             error_indices.size(), static_cast<std::size_t>(k))) {
        const EvalOutcome& o = outcomes[error_indices[pick]];
        const Example* ex = dataset.find(o.example_id);
        if (ex == nullptr) {
            throw DataError(fmt::format("outcome references unknown example {}",
                                        o.example_id));
        }
        out.push_back(ErrorExample{ex->id, render_example_input(*ex), ex->gold,
                                   o.raw_output});
    }
    return out;
}

}  // namespace

std::vector<ErrorExample> sample_errors(const ScoredPrompt& scored,
                                        const Dataset& dataset, int k,
                                        SubstreamRng& rng) {
    return sample_error_outcomes(scored.outcomes, dataset, k, rng);
}

std::vector<EvalOutcome> flip_predictions(const ScoredPrompt& scored,
                                          const Dataset& dataset,
                                          const AnswerSchema& schema,
                                          SubstreamRng& rng) {
    // value pool for numeric tasks: distinct golds observed in the split
    std::vector<std::string> numeric_pool;
    if (schema.kind == AnswerKind::kNumericString) {
        std::set<std::string> seen;
        for (const auto& o : scored.outcomes) {
            if (const Example* ex = dataset.find(o.example_id)) {
                if (seen.insert(ex->gold).second) {
                    numeric_pool.push_back(ex->gold);
                }
            }
        }
    }

    std::vector<EvalOutcome> flipped;
    flipped.reserve(scored.outcomes.size());
    for (const auto& original : scored.outcomes) {
        EvalOutcome out = original;
        if (original.format_error || !original.parsed_answer) {
            out.flipped = false;  // unflippable, kept verbatim
            flipped.push_back(std::move(out));
            continue;
        }
        const Example* ex = dataset.find(original.example_id);
        if (ex == nullptr) {
            throw DataError(fmt::format("outcome references unknown example {}",
                                        original.example_id));
        }

        std::vector<std::string> pool;
        if (schema.kind == AnswerKind::kChoice) {
            for (const auto& c : ex->choices) {
                if (!iequals(c.label, *original.parsed_answer)) {
                    pool.push_back(c.label);
                }
            }
        } else {
            for (const auto& v : numeric_pool) {
                if (v != *original.parsed_answer) {
                    pool.push_back(v);
                }
            }
        }
        if (pool.empty()) {
            out.flipped = false;
            flipped.push_back(std::move(out));
            continue;
        }
        const std::string replacement = pool[rng.uniform_index(pool.size())];
        const std::string envelope = fmt::format("{{\"answer\": \"{}\"}}", replacement);
        ParsedAnswer span = parse_answer(original.raw_output, schema, ex->choices);
        if (span.span_end > span.span_begin) {
            out.raw_output = original.raw_output.substr(0, span.span_begin) + envelope +
                             original.raw_output.substr(span.span_end);
        } else {
            out.raw_output = original.raw_output + "\n" + envelope;
        }
        out.parsed_answer = replacement;
        out.correct = answers_match(replacement, ex->gold, schema);
        out.flipped = true;
        flipped.push_back(std::move(out));
    }
    return flipped;
}

std::vector<ErrorExample> sample_pseudo_errors(const std::vector<EvalOutcome>& pseudo,
                                               const Dataset& dataset, int k,
                                               SubstreamRng& rng) {
    return sample_error_outcomes(pseudo, dataset, k, rng);
}

}  // namespace promptopt
