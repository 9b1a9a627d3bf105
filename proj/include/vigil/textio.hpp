#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace vigil {

/// Shortest decimal text that parses back to the identical double.
std::string format_exact(double v);

/// printf-style %.<digits>g formatting.
std::string format_sig(double v, int digits);

/// Strict full-string double parse; throws ParseError with `context`.
double parse_double(std::string_view text, std::string_view context);
long long parse_int(std::string_view text, std::string_view context);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

/// Writes through `fill` into a sibling temporary file, then renames it over
/// `path`. Nothing appears at `path` if `fill` throws.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& fill);

std::string read_file(const std::filesystem::path& path);

}  // namespace vigil
