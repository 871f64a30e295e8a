#include "agenteval/csv.hpp"

#include <fstream>
#include <sstream>

#include "agenteval/errors.hpp"

namespace agenteval {

namespace {

// Splits one CSV text into records, honoring quoted fields.
std::vector<std::vector<std::string>> parse_records(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        fields.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(fields);
        fields.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                break;
            case '\n':
                end_record();
                break;
            default:
                field += c;
                field_started = true;
                break;
        }
    }
    if (in_quotes) throw Error(ErrorKind::parse, "unterminated quote in CSV");
    if (field_started || !fields.empty()) end_record();
    return records;
}

} // namespace

CsvTable parse_csv(const std::string& text) {
    auto records = parse_records(text);
    if (records.empty()) throw Error(ErrorKind::parse, "empty CSV");
    CsvTable table;
    table.header = records.front();
    table.rows.assign(records.begin() + 1, records.end());
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) {
            throw Error(ErrorKind::parse, "CSV row has " + std::to_string(row.size()) +
                                              " fields, header has " +
                                              std::to_string(table.header.size()));
        }
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::config, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str());
}

std::string format_csv_field(const std::string& field) {
    bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::string format_csv_row(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += format_csv_field(fields[i]);
    }
    out += '\n';
    return out;
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << format_csv_row(header);
    for (const auto& row : rows) out << format_csv_row(row);
}

} // namespace agenteval
