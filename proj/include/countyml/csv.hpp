#ifndef COUNTYML_CSV_HPP
#define COUNTYML_CSV_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace countyml::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
};

// RFC 4180: quoted fields may contain commas, escaped quotes ("") and
// newlines. Accepts both \n and \r\n line endings.
Table read_file(const std::filesystem::path& path);
Table read_string(const std::string& text, const std::string& origin);

std::string escape_field(std::string_view field);
void write_file(const std::filesystem::path& path, const Table& table);

// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

// Locale-independent; rejects trailing junk. Empty optional on failure.
std::optional<double> parse_double(std::string_view text);

// Missing cells are empty strings or the tokens NA / null, case-insensitive.
bool is_missing_token(std::string_view text);

std::string trim(std::string_view text);

}  // namespace countyml::csv

#endif  // COUNTYML_CSV_HPP
