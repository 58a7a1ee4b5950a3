#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace ssws::util {

using CsvRow = std::vector<std::string>;

// RFC 4180 style: fields containing the separator, quotes or newlines are
// quoted, embedded quotes doubled.
std::string csv_escape(std::string_view field, char sep = ',');
std::string csv_line(const CsvRow& fields, char sep = ',');

// Reads every record from the stream. Quoted fields may span lines.
std::vector<CsvRow> read_csv(std::istream& in, char sep = ',');
std::vector<CsvRow> read_csv_file(const std::string& path, char sep = ',');

// Column lookup by header name; throws std::runtime_error if absent.
std::size_t column_index(const CsvRow& header, std::string_view name);

}  // namespace ssws::util
