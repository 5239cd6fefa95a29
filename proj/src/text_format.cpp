#include "paircorr/text_format.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace paircorr {

std::string format_shortest(double value)
{
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), end);
}

std::string format_sig6(double value)
{
    std::array<char, 64> buf{};
    int n = std::snprintf(buf.data(), buf.size(), "%.6g", value);
    return std::string(buf.data(), static_cast<std::size_t>(n));
}

namespace {
template<class T>
std::optional<T> parse_full(std::string_view text)
{
    T value{};
    if (text.empty())
        return std::nullopt;
    // from_chars rejects a leading '+', which is fine for this grammar
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        return std::nullopt;
    return value;
}
}  // namespace

std::optional<double> parse_double(std::string_view text)
{
    auto v = parse_full<double>(text);
    if (v && !std::isfinite(*v))
        return std::nullopt;
    return v;
}

std::optional<long long> parse_int(std::string_view text) { return parse_full<long long>(text); }

std::optional<unsigned long long> parse_uint(std::string_view text)
{
    return parse_full<unsigned long long>(text);
}

std::string_view trim(std::string_view text)
{
    auto const ws = " \t\r\n";
    auto first = text.find_first_not_of(ws);
    if (first == std::string_view::npos)
        return {};
    auto last = text.find_last_not_of(ws);
    return text.substr(first, last - first + 1);
}

}  // namespace paircorr
