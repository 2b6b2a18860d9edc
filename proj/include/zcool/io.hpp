#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace zcool {

// CSV with '.' decimals, a header row and LF line endings, independent of the
// process locale.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    void row(const std::vector<double>& values);
    void row_mixed(const std::vector<std::string>& values);
    const std::string& str() const { return body_; }

    static std::string format(double v);

private:
    std::string body_;
    size_t columns_;
};

// Output bundle of one CLI command: file name -> contents.
struct CommandResult {
    std::map<std::string, std::string> files;
};

void write_files(const std::string& dir, const CommandResult& result);

std::string version_string();

}  // namespace zcool
