// CSV and atomic file output. Numbers are formatted with %.12g so that a
// given dataset always serializes to identical bytes; the optional timestamp
// header is the only non-reproducible line and can be suppressed.
#pragma once

#include <initializer_list>
#include <string>
#include <vector>

namespace cavitysim {

// Writes content to a temporary file in the target directory, then renames.
void write_text_atomic(const std::string& path, const std::string& content);

std::string format_double(double v);

class CsvWriter {
public:
    explicit CsvWriter(bool timestamp_header = false);

    void header(const std::string& columns);
    void row(std::initializer_list<double> values);
    void row(const std::vector<double>& values);
    void raw_row(const std::string& line);

    const std::string& content() const { return content_; }
    void write_atomic(const std::string& path) const { write_text_atomic(path, content_); }

private:
    std::string content_;
};

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

// Reads a CSV written by CsvWriter: `#` lines are skipped, the first
// non-comment line is the header.
CsvTable read_csv(const std::string& path);

}  // namespace cavitysim
