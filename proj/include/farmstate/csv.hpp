#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace farmstate::csv {

// Shortest decimal form that round-trips a double exactly ("%.17g" with
// trailing-zero trimming done by the C library).
std::string format_double(double v);

// Strict double parser: the whole field must be consumed. Empty fields and
// anything unparsable return false.
bool try_parse_double(std::string_view field, double& out);

// Strict non-negative integer parser.
bool try_parse_index(std::string_view field, long long& out);

std::vector<std::string_view> split_fields(std::string_view line);

// Whole-file reader used by the ingest paths; throws IoError if unreadable.
std::string read_file(const std::string& path);

}  // namespace farmstate::csv
