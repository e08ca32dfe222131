#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace natsel {

// Shortest decimal text that parses back to the same double; NaN becomes "".
std::string format_number(double value);
double parse_number(const std::string& text);  // "" -> NaN

// Minimal CSV for the files this project writes: no quoting, ',' separator.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws FormatError
};

CsvTable read_csv(std::istream& in);
std::vector<std::string> split_fields(const std::string& line, char sep = ',');
std::string join_fields(const std::vector<std::string>& fields, char sep = ',');

}  // namespace natsel
