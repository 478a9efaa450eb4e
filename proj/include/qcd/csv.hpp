#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace qcd {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

// Inverse of format_double; accepts "inf", "-inf" and "nan". Throws InvalidArgument.
double parse_double(std::string_view text);

std::vector<std::string> split(std::string_view text, char sep);

std::string trim(std::string_view text);

// Accumulates rows in memory and writes them once (UTF-8, ',' separator, header row).
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    const std::vector<std::string>& header() const { return header_; }
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }

    void add_row(std::vector<std::string> row);

    std::string str() const;
    void write(const std::filesystem::path& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace qcd
