#pragma once
#include <cstdint>
#include <string>
#include <string_view>

namespace twinbeam {

/// Shortest decimal form that round-trips the exact double, '.' separator,
/// independent of the global locale.
std::string format_double(double v);

/// Fixed-width scientific form with 17 significant digits, for CSV output
/// that must be byte-stable across platforms and reruns.
std::string format_double_sci(double v);

std::string format_u64(std::uint64_t v);

/// Fixed-point form with the given number of decimals (for human-readable
/// tables; still locale-independent).
std::string format_fixed(double v, int decimals);

/// Strict full-string parses; on failure throw ParseError mentioning `what`.
double parse_double(std::string_view text, std::string_view what);
std::uint64_t parse_u64(std::string_view text, std::string_view what);
long long parse_i64(std::string_view text, std::string_view what);

std::string_view trim(std::string_view s);

} // namespace twinbeam
