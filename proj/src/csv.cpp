#include "ebmine/csv.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <system_error>

namespace ebmine {

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, std::size_t line_no, const std::string& col) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error("line " + std::to_string(line_no) + ": bad numeric value '" + s +
                                 "' in column " + col);
    return v;
}

long parse_long(const std::string& s, std::size_t line_no, const std::string& col) {
    long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error("line " + std::to_string(line_no) + ": bad integer value '" + s +
                                 "' in column " + col);
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

CsvReader::CsvReader(const std::string& path) : in_(path), path_(path) {
    if (!in_) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in_, line)) throw std::runtime_error(path + ": empty file, header expected");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    line_no_ = 1;
    header_ = split_csv_line(line);
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (!index_.emplace(header_[i], i).second)
            throw std::runtime_error(path + ": duplicate column '" + header_[i] + "'");
    }
}

bool CsvReader::has_column(const std::string& name) const { return index_.count(name) > 0; }

std::size_t CsvReader::column(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error(path_ + ": missing column '" + name + "'");
    return it->second;
}

bool CsvReader::next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_no_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        fields = split_csv_line(line);
        if (fields.size() != header_.size())
            throw std::runtime_error(path_ + ": line " + std::to_string(line_no_) + ": expected " +
                                     std::to_string(header_.size()) + " fields, got " +
                                     std::to_string(fields.size()));
        return true;
    }
    return false;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path), path_(path), n_cols_(header.size()) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out_ << ',';
        out_ << header[i];
    }
    out_ << '\n';
}

void CsvWriter::write_row(const std::vector<std::string>& fields) {
    if (fields.size() != n_cols_)
        throw std::runtime_error(path_ + ": row width mismatch");
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << fields[i];
    }
    out_ << '\n';
}

void CsvWriter::close() {
    out_.close();
    if (!out_) throw std::runtime_error("failed writing " + path_);
}

} // namespace ebmine
