#ifndef SWARM_CSV_HPP
#define SWARM_CSV_HPP

#include <charconv>
#include <concepts>
#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "swarm/error.hpp"

namespace swarm::csv {

/// Shortest decimal text that parses back to exactly the same value.
template <class T>
std::string format(T value) {
  if constexpr (std::floating_point<T>) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) throw Error("csv: cannot format number");
    return std::string(buf, ptr);
  } else {
    return std::to_string(value);
  }
}

/// Writes comma-separated rows with LF endings. Fields are never quoted;
/// callers only emit identifiers and numbers.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(&out) {}

  Writer& header(std::initializer_list<std::string_view> names) {
    bool first = true;
    for (auto n : names) {
      if (!first) *out_ << ',';
      *out_ << n;
      first = false;
    }
    *out_ << '\n';
    return *this;
  }

  Writer& header(const std::vector<std::string>& names) {
    for (std::size_t k = 0; k < names.size(); ++k) *out_ << (k ? "," : "") << names[k];
    *out_ << '\n';
    return *this;
  }

  template <class T>
  Writer& field(const T& v) {
    if (!first_) *out_ << ',';
    first_ = false;
    if constexpr (std::is_arithmetic_v<T>)
      *out_ << format(v);
    else
      *out_ << v;
    return *this;
  }

  Writer& end_row() {
    *out_ << '\n';
    first_ = true;
    return *this;
  }

 private:
  std::ostream* out_;
  bool first_ = true;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    throw Error("csv: no column '" + std::string(name) + "'");
  }

  double number(std::size_t row, std::string_view col) const {
    const std::string& s = rows.at(row).at(column(col));
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error("csv: '" + s + "' is not a number");
    return v;
  }
};

inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Parses a header row plus data rows; every row must match the header width.
inline Table read(std::istream& in) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw Error("csv: missing header");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != t.header.size())
      throw Error("csv: row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(row.size()) +
                  " fields, expected " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Table read_string(const std::string& text) {
  std::istringstream in(text);
  return read(in);
}

}  // namespace swarm::csv

#endif  // SWARM_CSV_HPP
