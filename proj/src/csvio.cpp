#include "cavitysim/csvio.hpp"

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cavitysim/errors.hpp"

namespace cavitysim {

void write_text_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw SimError("IO", "cannot open '" + tmp.string() + "' for writing");
        out << content;
        if (!out) throw SimError("IO", "write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

CsvWriter::CsvWriter(bool timestamp_header) {
    if (timestamp_header) {
        const std::time_t now = std::time(nullptr);
        char buf[64];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        content_ += std::string("# generated: ") + buf + "\n";
    }
}

void CsvWriter::header(const std::string& columns) { content_ += columns + "\n"; }

void CsvWriter::row(std::initializer_list<double> values) {
    row(std::vector<double>(values));
}

void CsvWriter::row(const std::vector<double>& values) {
    std::string line;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) line += ", ";
        line += format_double(values[i]);
    }
    content_ += line + "\n";
}

void CsvWriter::raw_row(const std::string& line) { content_ += line + "\n"; }

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SimError("IO", "cannot open '" + path + "'");
    CsvTable table;
    std::string line;
    bool have_header = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string cell;
        if (!have_header) {
            while (std::getline(ls, cell, ',')) {
                const auto b = cell.find_first_not_of(" \t");
                const auto e = cell.find_last_not_of(" \t\r");
                table.columns.push_back(b == std::string::npos
                                            ? ""
                                            : cell.substr(b, e - b + 1));
            }
            have_header = true;
            continue;
        }
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw SimError("IO", path + ":" + std::to_string(lineno) +
                                         ": invalid number '" + cell + "'");
            }
        }
        if (row.size() != table.columns.size()) {
            throw SimError("IO", path + ":" + std::to_string(lineno) +
                                     ": wrong number of columns");
        }
        table.rows.push_back(std::move(row));
    }
    if (!have_header) throw SimError("IO", path + ": empty CSV");
    return table;
}

}  // namespace cavitysim
