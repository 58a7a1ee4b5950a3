#include "ssws/util/csv.hpp"

#include <fstream>
#include <istream>
#include <stdexcept>

namespace ssws::util {

std::string csv_escape(std::string_view field, char sep) {
  bool quote = field.find_first_of(std::string{sep} + "\"\r\n") != std::string_view::npos;
  if (!quote) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_line(const CsvRow& fields, char sep) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += sep;
    line += csv_escape(fields[i], sep);
  }
  return line;
}

std::vector<CsvRow> read_csv(std::istream& in, char sep) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
    } else if (c == sep) {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (in_quotes) throw std::runtime_error("csv: unterminated quoted field");
  if (any) {
    row.push_back(std::move(field));
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CsvRow> read_csv_file(const std::string& path, char sep) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_csv(in, sep);
}

std::size_t column_index(const CsvRow& header, std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw std::runtime_error("missing column '" + std::string(name) + "'");
}

}  // namespace ssws::util
