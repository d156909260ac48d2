#pragma once

#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ebmine {

// Minimal CSV layer for the plain comma-separated files this project reads
// and writes: no quoting, no embedded commas. Numbers round-trip exactly
// (shortest form that parses back to the same double).

std::string format_double(double v);
double parse_double(const std::string& s, std::size_t line_no, const std::string& col);
long parse_long(const std::string& s, std::size_t line_no, const std::string& col);

std::vector<std::string> split_csv_line(const std::string& line);

class CsvReader {
  public:
    explicit CsvReader(const std::string& path);

    const std::vector<std::string>& header() const { return header_; }
    bool has_column(const std::string& name) const;
    // Throws std::runtime_error naming the column when absent.
    std::size_t column(const std::string& name) const;

    // Reads the next data row; false at end of file. Rows must have exactly
    // as many fields as the header.
    bool next(std::vector<std::string>& fields);

    std::size_t line_number() const { return line_no_; }

  private:
    std::ifstream in_;
    std::string path_;
    std::vector<std::string> header_;
    std::map<std::string, std::size_t> index_;
    std::size_t line_no_ = 0;
};

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);

    void write_row(const std::vector<std::string>& fields);
    void close();

  private:
    std::ofstream out_;
    std::string path_;
    std::size_t n_cols_;
};

} // namespace ebmine
