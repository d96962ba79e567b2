#include "promptopt/templates.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "promptopt/errors.hpp"
#include "promptopt/strings.hpp"

#ifndef PROMPTOPT_ASSET_DIR_DEFAULT
#define PROMPTOPT_ASSET_DIR_DEFAULT ""
#endif

namespace promptopt {

const std::vector<std::string>& known_placeholders() {
    static const std::vector<std::string> kNames = {
        "ins",           "error_examples", "feedbacks", "prompts_scores",
        "index",         "input",          "answer",    "llm_output",
        "output",        "score",          "clusters",  "examples",
        "answer_format", "instruction",
    };
    return kNames;
}

TemplateLibrary TemplateLibrary::load(const std::filesystem::path& dir) {
    TemplateLibrary lib;
    if (!std::filesystem::is_directory(dir)) {
        throw TemplateError(fmt::format("template directory {} does not exist",
                                        dir.string()));
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") {
            continue;
        }
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        MetaTemplate t{entry.path().stem().string(), buffer.str()};
        lib.templates_.emplace(t.name, std::move(t));
    }
    if (lib.templates_.empty()) {
        throw TemplateError(fmt::format("no template assets found in {}", dir.string()));
    }
    return lib;
}

TemplateLibrary TemplateLibrary::load_default() {
    if (const char* env = std::getenv("PROMPTOPT_ASSET_DIR")) {
        return load(env);
    }
    return load(PROMPTOPT_ASSET_DIR_DEFAULT);
}

const MetaTemplate& TemplateLibrary::get(std::string_view name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw TemplateError(fmt::format("unknown template \"{}\"", name));
    }
    return it->second;
}

std::vector<std::string> TemplateLibrary::names() const {
    std::vector<std::string> out;
    out.reserve(templates_.size());
    for (const auto& [name, _] : templates_) {
        out.push_back(name);
    }
    return out;
}

namespace {

// Returns the placeholder name when body[pos] starts "[name]" for a known
// name, else empty.
std::string_view placeholder_at(std::string_view body, std::size_t pos) {
    for (const auto& name : known_placeholders()) {
        if (body.size() - pos >= name.size() + 2 && body[pos] == '[' &&
            body.compare(pos + 1, name.size(), name) == 0 &&
            body[pos + 1 + name.size()] == ']') {
            return name;
        }
    }
    return {};
}

}  // namespace

std::string render(const MetaTemplate& tmpl, const Bindings& bindings) {
    std::string out;
    out.reserve(tmpl.body.size());
    const std::string_view body = tmpl.body;
    std::size_t i = 0;
    while (i < body.size()) {
        if (body[i] == '[') {
            const std::string_view name = placeholder_at(body, i);
            if (!name.empty()) {
                auto it = bindings.find(std::string(name));
                if (it == bindings.end()) {
                    throw TemplateError(fmt::format(
                        "template \"{}\": unbound placeholder [{}]", tmpl.name, name));
                }
                out += it->second;
                i += name.size() + 2;
                continue;
            }
        }
        out.push_back(body[i]);
        ++i;
    }
    return out;
}

std::vector<std::string> residual_placeholders(std::string_view text) {
    std::vector<std::string> found;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '[') {
            const std::string_view name = placeholder_at(text, i);
            if (!name.empty()) {
                found.emplace_back(name);
            }
        }
    }
    return found;
}

std::vector<std::string> extract_wrapped(std::string_view text,
                                         std::string_view open_tag,
                                         std::string_view close_tag) {
    if (open_tag.empty() || close_tag.empty()) {
        throw TemplateError("extract_wrapped: tags must be nonempty");
    }
    std::vector<std::string> out;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t open = text.find(open_tag, pos);
        if (open == std::string_view::npos) {
            break;
        }
        const std::size_t inner = open + open_tag.size();
        const std::size_t close = text.find(close_tag, inner);
        if (close == std::string_view::npos) {
            throw TemplateError(fmt::format(
                "unbalanced tag {} at byte {}", open_tag, open));
        }
        out.emplace_back(trim(text.substr(inner, close - inner)));
        pos = close + close_tag.size();
    }
    return out;
}

std::string strip_wrapped(std::string_view text, std::string_view open_tag,
                          std::string_view close_tag) {
    std::string out;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t open = text.find(open_tag, pos);
        if (open == std::string_view::npos) {
            out += text.substr(pos);
            break;
        }
        const std::size_t close = text.find(close_tag, open + open_tag.size());
        if (close == std::string_view::npos) {
            out += text.substr(pos);
            break;
        }
        out += text.substr(pos, open - pos);
        pos = close + close_tag.size();
    }
    return std::string(trim(out));
}

std::string render_error_examples(const TemplateLibrary& lib,
                                  std::string_view example_template,
                                  const std::vector<ErrorExample>& samples,
                                  const AnswerSchema& schema) {
    const MetaTemplate& tmpl = lib.get(example_template);
    // The per-method case layouts differ in what [answer] and [llm_output]
    // stand for: the strategic-reflection format prints bare labels and the
    // parsed prediction, the others print the gold envelope and raw output.
    const bool bare_labels = example_template.find("prompt_agent") == 0;
    std::string out;
    int index = 1;
    for (const auto& sample : samples) {
        Bindings b;
        b["index"] = std::to_string(index++);
        b["input"] = sample.input;
        b["output"] = sample.model_answer;
        if (bare_labels) {
            b["answer"] = sample.gold;
            ParsedAnswer parsed = parse_answer(sample.model_answer, schema, {});
            b["llm_output"] = parsed.answer ? *parsed.answer : "N/A";
        } else {
            b["answer"] = fmt::format("{{\"answer\": \"{}\"}}", sample.gold);
            b["llm_output"] = sample.model_answer;
        }
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

std::string render_init_examples(const TemplateLibrary& lib,
                                 const std::vector<const Example*>& examples) {
    const MetaTemplate& tmpl = lib.get("init_example");
    std::string out;
    for (const Example* ex : examples) {
        Bindings b;
        b["input"] = render_example_input(*ex);
        b["answer"] = ex->gold;
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

}  // namespace promptopt
