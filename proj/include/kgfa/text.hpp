#ifndef KGFA_TEXT_HPP
#define KGFA_TEXT_HPP

#include <optional>
#include <string>
#include <vector>

namespace kgfa {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

/// Like format_double but integral values keep a trailing ".0"
/// (summary-table convention: "2.0" rather than "2").
std::string format_double_pointed(double value);

/// Strict full-string parse; nullopt on anything else.
std::optional<double> parse_double(const std::string& text);

std::vector<std::string> split(const std::string& line, char delimiter);

}  // namespace kgfa

#endif  // KGFA_TEXT_HPP
