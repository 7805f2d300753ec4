#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace aircast {

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double value);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    static CsvTable read_file(const std::filesystem::path& path);

    // index of a required column; throws ParseError naming the column
    std::size_t col(const std::string& name) const;
    bool has_col(const std::string& name) const;
};

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

double parse_double_field(const std::string& field, const std::string& column, std::size_t row);

}  // namespace aircast
