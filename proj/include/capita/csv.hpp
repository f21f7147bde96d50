#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace capita::csv {

struct Row {
  std::size_t line = 0;  // 1-based physical line where the record starts
  std::vector<std::string> fields;
};

/// Parses RFC-4180 text: comma separated, double-quote quoting with "" escapes,
/// CRLF or LF record ends, embedded newlines inside quotes. A trailing newline
/// does not produce an empty record. Throws std::invalid_argument on an
/// unterminated quote.
std::vector<Row> parse(std::string_view text);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

/// Accumulates rows into a string buffer with LF record ends.
class Writer {
public:
  explicit Writer(const std::vector<std::string>& header) { row(header); }
  Writer() = default;

  void row(const std::vector<std::string>& fields);
  template <typename... Ts>
  void cells(const Ts&... fs) {
    row(std::vector<std::string>{std::string(fs)...});
  }
  const std::string& str() const { return buf_; }

private:
  std::string buf_;
};

/// Fixed-precision decimal text for doubles in report files ("%.*f", no locale).
std::string fmt(double value, int decimals = 6);

}  // namespace capita::csv
