#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace carhhmm {

/// CSV problem with the 1-based line number where it was detected.
class CsvError : public std::runtime_error {
 public:
  CsvError(long line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

/// Doubles are serialized with 17 significant digits so a read-back is
/// bit-exact.
inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

/// Whole-file CSV table with a mandatory header row. No quoting or escaping;
/// every schema in this project is plain comma-separated numbers and names.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // same arity as header
  std::vector<long> line_numbers;              // source line of each row

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }

  int require_column(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw CsvError(1, "missing required column '" + name + "'");
    return c;
  }

  bool cell_empty(std::size_t row, int col) const {
    return rows[row][static_cast<std::size_t>(col)].empty();
  }

  double cell_double(std::size_t row, int col) const {
    const std::string& s = rows[row][static_cast<std::size_t>(col)];
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw CsvError(line_numbers[row], "expected a number in column '" +
                                            header[static_cast<std::size_t>(col)] + "', got '" + s +
                                            "'");
    }
  }

  long cell_long(std::size_t row, int col) const {
    const std::string& s = rows[row][static_cast<std::size_t>(col)];
    try {
      std::size_t used = 0;
      const long v = std::stol(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw CsvError(line_numbers[row], "expected an integer in column '" +
                                            header[static_cast<std::size_t>(col)] + "', got '" + s +
                                            "'");
    }
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError(0, "cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size())
      throw CsvError(line_no, "expected " + std::to_string(table.header.size()) +
                                  " columns, got " + std::to_string(cells.size()));
    table.rows.push_back(std::move(cells));
    table.line_numbers.push_back(line_no);
  }
  if (table.header.empty()) throw CsvError(1, "empty file '" + path + "'");
  return table;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path), n_columns_(header.size()) {
    if (!out_) throw CsvError(0, "cannot open '" + path + "' for writing");
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != n_columns_)
      throw std::invalid_argument("CsvWriter: row arity differs from header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  std::size_t n_columns_;
};

}  // namespace carhhmm
