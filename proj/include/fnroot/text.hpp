#pragma once

#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fnroot {

/// Invalid or incomplete user configuration (schema maps, scenarios).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Splits one delimiter-separated line. Double-quoted cells may contain the
/// delimiter; a doubled quote inside a quoted cell is a literal quote.
/// Returns nullopt for an unterminated quote.
inline std::optional<std::vector<std::string>> split_delimited(const std::string& line, char delimiter) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(c);
            }
        } else if (c == '"' && cell.empty()) {
            quoted = true;
        } else if (c == delimiter) {
            cells.push_back(std::move(cell));
            cell.clear();
        } else if (c != '\r') {
            cell.push_back(c);
        }
    }
    if (quoted) return std::nullopt;
    cells.push_back(std::move(cell));
    return cells;
}

inline std::vector<std::string> read_lines(std::istream& in) {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

}  // namespace fnroot
