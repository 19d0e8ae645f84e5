#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "debm/error.hpp"

namespace debm::csv {

/// Splits one CSV record. Handles double-quoted fields with "" escapes;
/// does not support embedded newlines (none of our formats emit them).
inline std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// Reads all lines of a text file, tolerating CRLF endings and a missing
/// final newline. Throws LoadError if the file cannot be opened.
inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

/// Formats a double with the given number of significant digits ("%.*g").
/// Used everywhere a float goes into a text output so that re-runs are
/// byte-identical.
inline std::string format_double(double v, int significant_digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", significant_digits, v);
    return buf;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
    if (!out) throw Error("write failed: " + path);
}

/// Quotes a field if it contains a comma or a quote.
inline std::string quote_if_needed(const std::string& s) {
    if (s.find(',') == std::string::npos && s.find('"') == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

} // namespace debm::csv
