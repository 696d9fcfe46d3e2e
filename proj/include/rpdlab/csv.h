#ifndef RPDLAB_CSV_H_
#define RPDLAB_CSV_H_

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace rpdlab {

struct CsvRecord {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and
// line breaks. Accepts LF or CRLF endings. Throws ValidationError on an
// unterminated quote.
std::vector<CsvRecord> read_csv(std::istream& in, const std::string& source);

// Quotes the field when it contains a comma, quote or line break.
std::string csv_escape(std::string_view field);

}  // namespace rpdlab

#endif  // RPDLAB_CSV_H_
