#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ctlab {

std::string read_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: temp file in the same directory, then rename.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Splits on ASCII/Unicode whitespace runs; never yields empty tokens.
std::vector<std::string> split_whitespace(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Decodes UTF-8 to code points; invalid bytes become U+FFFD.
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);
void utf8_append(std::string& out, char32_t cp);

std::string format_double(double v, int precision = 6);

}  // namespace ctlab
