#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tfx::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);
std::vector<std::string_view> split(std::string_view s, char sep);

/// RFC 4180-ish record reader. Quoted fields may contain the delimiter,
/// doubled quotes and newlines. A leading UTF-8 BOM on the first record is
/// dropped.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in, char delimiter = ',');

  /// Returns false at end of input.
  bool next(std::vector<std::string>& fields);

  /// 1-based line number where the last returned record started.
  std::size_t record_line() const { return record_line_; }

  char delimiter() const { return delimiter_; }
  void set_delimiter(char d) { delimiter_ = d; }

 private:
  std::istream& in_;
  char delimiter_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
  bool first_ = true;
};

/// Quotes a field only when it contains the delimiter, a quote or a newline.
std::string csv_field(std::string_view value, char delimiter = ',');

std::string csv_row(const std::vector<std::string>& fields, char delimiter = ',');

}  // namespace tfx::text
