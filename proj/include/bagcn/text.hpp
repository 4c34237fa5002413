#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace bagcn {

// Shortest round-trip decimal form of a double ("1", "0.5", "1e-12").
// Used everywhere a float goes into a text artifact so that re-serializing
// a parsed file reproduces it byte for byte.
std::string format_double(double v);

// Strict parsers; `where` is prepended to error messages (e.g. "features.tsv:12").
double parse_double(std::string_view token, const std::string& where);
long parse_long(std::string_view token, const std::string& where);

// Splits on a single delimiter; keeps empty tokens so column counts stay honest.
std::vector<std::string_view> split(std::string_view line, char delim);

// Renders rows as TSV (LF line endings) or as space-aligned text with a header rule.
std::string render_tsv(const std::vector<std::vector<std::string>>& rows);
std::string render_aligned(const std::vector<std::vector<std::string>>& rows);

}  // namespace bagcn
