#pragma once

// Small CSV helpers: UTF-8, ',' separator, '.' decimal point, no quoting.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace difflab {

// %.17g: round-trips any double.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; throws IoError if absent.
  std::size_t column(std::string_view name) const;
};

CsvTable read_csv_table(std::istream& is);
std::vector<std::string> split_csv_line(std::string_view line);

double parse_double(std::string_view s);
long long parse_int(std::string_view s);

}  // namespace difflab
