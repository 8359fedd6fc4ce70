// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace surveysim {

/// Header row plus data rows, all cells kept as raw strings.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by exact header name; throws ValidationError when absent.
  std::size_t column(std::string_view name) const;
};

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line ends.
/// A UTF-8 byte order mark at the start is skipped.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Quotes a cell when it contains a comma, quote or newline.
std::string csv_escape(std::string_view cell);

}  // namespace surveysim
