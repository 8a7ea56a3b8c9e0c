#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace s2l::csv {

using Row = std::vector<std::string>;

/// RFC 4180 records: quoted fields may hold separators, doubled quotes and
/// newlines. A UTF-8 byte order mark at the start is skipped.
std::vector<Row> parse(std::string_view text, char sep = ',');
std::vector<Row> read_file(const std::filesystem::path& path, char sep = ',');

/// Quotes a field only when it needs it.
std::string escape(std::string_view field, char sep = ',');
std::string join(const Row& row, char sep = ',');

std::string trim(std::string_view s);

}  // namespace s2l::csv
