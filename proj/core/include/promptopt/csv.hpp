#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace promptopt {

/// Minimal RFC-4180 CSV: fields containing commas, quotes or newlines are
/// quoted; everything parses back losslessly.
std::string csv_escape(const std::string& field);
std::string csv_row(const std::vector<std::string>& fields);

std::vector<std::vector<std::string>> parse_csv(const std::string& text);
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path,
               const std::vector<std::vector<std::string>>& rows);

/// Fixed-format float for CSV cells; trims trailing zeros ("0.5", "0.6875").
std::string format_metric(double value);

}  // namespace promptopt
