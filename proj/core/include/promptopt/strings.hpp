#pragma once

#include <string>
#include <string_view>

namespace promptopt {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

/// Collapses every whitespace run to a single space and trims the ends.
std::string collapse_whitespace(std::string_view s);

/// Levenshtein distance; used to guard LLM-made prompt edits.
std::size_t edit_distance(std::string_view a, std::string_view b);

}  // namespace promptopt
