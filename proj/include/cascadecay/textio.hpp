#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cascadecay {

// %.17g, enough digits to reconstruct the exact double on load.
std::string format_full(double v);
// %.9g, for human-facing metric columns.
std::string format_short(double v);

// Strict parsers: whole string must be consumed, empty input fails.
bool parse_u64(std::string_view s, std::uint64_t& out);
bool parse_i64(std::string_view s, std::int64_t& out);
bool parse_double(std::string_view s, double& out);

// Splits on '\t', keeping empty fields. Views point into `line`.
std::vector<std::string_view> split_tabs(std::string_view line);

// Drops one trailing '\r' so CRLF inputs parse like LF ones.
void strip_cr(std::string& line);

std::uint64_t fnv1a64(std::string_view data);

}  // namespace cascadecay
