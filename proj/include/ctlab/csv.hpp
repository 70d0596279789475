#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ctlab {

struct CsvRow {
  std::vector<std::string> fields;
  /// 1-based physical line where the record starts.
  long line = 0;
};

/// RFC-4180 reader: quoted fields, doubled quotes, embedded newlines, CRLF or LF.
std::vector<CsvRow> parse_csv(std::string_view contents);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);
std::string csv_line(const std::vector<std::string>& fields);

}  // namespace ctlab
