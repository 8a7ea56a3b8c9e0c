#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace s2l::utf8 {

struct CodePoint {
  char32_t value = 0;
  std::size_t offset = 0;  // byte offset in the source string
  std::size_t length = 0;  // encoded length in bytes
};

/// Decodes UTF-8; malformed bytes decode as U+FFFD of length 1.
std::vector<CodePoint> decode(std::string_view text);

/// Each code point as its own UTF-8 string.
std::vector<std::string> split(std::string_view text);

std::string encode(char32_t cp);

/// Lower-cases ASCII and Latin-1 letters; other scripts in scope are caseless.
std::string fold_case(std::string_view text);

/// Collapses whitespace runs to a single space and trims both ends.
std::string normalize_space(std::string_view text);

/// fold_case(normalize_space(text)): the key used for gazetteer lookups.
std::string lookup_key(std::string_view text);

}  // namespace s2l::utf8
