#include "zcool/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace zcool {

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
    for (size_t i = 0; i < header.size(); ++i) {
        if (i) body_ += ',';
        body_ += header[i];
    }
    body_ += '\n';
}

std::string CsvWriter::format(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != columns_)
        throw std::invalid_argument("csv row width mismatch");
    for (size_t i = 0; i < values.size(); ++i) {
        if (i) body_ += ',';
        body_ += format(values[i]);
    }
    body_ += '\n';
}

void CsvWriter::row_mixed(const std::vector<std::string>& values) {
    if (values.size() != columns_)
        throw std::invalid_argument("csv row width mismatch");
    for (size_t i = 0; i < values.size(); ++i) {
        if (i) body_ += ',';
        body_ += values[i];
    }
    body_ += '\n';
}

void write_files(const std::string& dir, const CommandResult& result) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, contents] : result.files) {
        const auto path = std::filesystem::path(dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << contents;
    }
}

std::string version_string() { return "zcool 0.1.0"; }

}  // namespace zcool
