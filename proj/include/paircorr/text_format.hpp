#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace paircorr {

// Shortest decimal string that parses back to the same double.
std::string format_shortest(double value);

// Six significant digits, printf "%.6g" style; used for all CSV floats.
std::string format_sig6(double value);

// Strict full-match parsers: no leading/trailing garbage, no unit suffixes.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);
std::optional<unsigned long long> parse_uint(std::string_view text);

std::string_view trim(std::string_view text);

}  // namespace paircorr
