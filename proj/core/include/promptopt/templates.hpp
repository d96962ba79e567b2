#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "promptopt/tasks.hpp"
#include "promptopt/types.hpp"

namespace promptopt {

/// Placeholder names render() recognizes. Any other bracketed text in a
/// template body is literal content and passes through untouched.
const std::vector<std::string>& known_placeholders();

struct MetaTemplate {
    std::string name;  // asset file stem
    std::string body;
};

using Bindings = std::map<std::string, std::string>;

/// The meta-prompt corpus, one UTF-8 text asset per template.
class TemplateLibrary {
public:
    static TemplateLibrary load(const std::filesystem::path& dir);
    /// Resolves the asset directory from $PROMPTOPT_ASSET_DIR, falling back
    /// to the directory this build was configured with.
    static TemplateLibrary load_default();

    const MetaTemplate& get(std::string_view name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, MetaTemplate, std::less<>> templates_;
};

/// Byte-exact placeholder substitution. Throws TemplateError naming the
/// first known placeholder that appears in the body without a binding.
/// Substituted values are never rescanned.
std::string render(const MetaTemplate& tmpl, const Bindings& bindings);

/// Known placeholders still present in `text` (for render-then-scan checks).
std::vector<std::string> residual_placeholders(std::string_view text);

/// Inner contents of each non-overlapping open..close span, in order,
/// trimmed. An open tag without a matching close raises TemplateError with
/// the byte position of the dangling tag.
std::vector<std::string> extract_wrapped(std::string_view text,
                                         std::string_view open_tag,
                                         std::string_view close_tag);

/// `text` with every open..close span (tags included) removed; used to keep
/// analysis prose while dropping the wrapped instruction.
std::string strip_wrapped(std::string_view text, std::string_view open_tag,
                          std::string_view close_tag);

/// Error-example blocks rendered with the given per-sample template
/// ("apo_error_example", "prompt_agent_error_example", "opro_error_example",
/// ...), joined by blank lines. [index] is 1-based.
std::string render_error_examples(const TemplateLibrary& lib,
                                  std::string_view example_template,
                                  const std::vector<ErrorExample>& samples,
                                  const AnswerSchema& schema);

/// Input/answer blocks for initialization prompts.
std::string render_init_examples(const TemplateLibrary& lib,
                                 const std::vector<const Example*>& examples);

}  // namespace promptopt
