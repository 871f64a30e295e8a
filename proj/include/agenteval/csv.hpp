#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace agenteval {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// RFC-4180 style: fields containing comma, quote or newline are quoted,
// quotes doubled. First record is the header.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);

std::string format_csv_field(const std::string& field);
std::string format_csv_row(const std::vector<std::string>& fields);

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

} // namespace agenteval
