#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace phylembed::tsv {

std::vector<std::string_view> split(std::string_view line, char delim = '\t');

/// Reads one line, stripping a trailing '\r'. Returns false at end of input.
bool read_line(std::istream& in, std::string& line);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_real(double v);

/// Strict decimal parse of the whole token; returns false on any trailing garbage.
bool parse_real(std::string_view token, double& out);
bool parse_int(std::string_view token, long long& out);

std::string join(const std::vector<std::string>& parts, char sep = '\t');

}  // namespace phylembed::tsv
