#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace odam {

/// Shortest decimal string that parses back to exactly `v`.
std::string format_real(double v);

std::optional<double> parse_real(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

/// Splits on runs of spaces/tabs; drops a trailing '\r'.
std::vector<std::string_view> split_ws(std::string_view line);

/// Splits on a single-character separator, trimming surrounding blanks.
std::vector<std::string> split_list(std::string_view s, char sep = ',');

std::string_view trim(std::string_view s);

}  // namespace odam
