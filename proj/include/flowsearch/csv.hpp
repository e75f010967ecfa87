#pragma once

// Minimal RFC 4180 CSV: quote fields holding commas, quotes, or newlines.

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "flowsearch/errors.hpp"

namespace flowsearch::csv {

inline std::string field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// Shortest text that reads back to the same double.
inline std::string num(double v) {
    char buf[32];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline void write_row(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) os << ',';
        os << field(cells[i]);
    }
    os << '\n';
}

/// Reads one record (which may span lines inside quotes). False at end of input.
inline bool read_row(std::istream& is, std::vector<std::string>& cells) {
    cells.clear();
    std::string cur;
    bool quoted = false, any = false;
    for (int ch; (ch = is.get()) != EOF;) {
        any = true;
        const char c = static_cast<char>(ch);
        if (quoted) {
            if (c == '"') {
                if (is.peek() == '"') {
                    cur += '"';
                    is.get();
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cur));
            cur.clear();
        } else if (c == '\n') {
            cells.push_back(std::move(cur));
            return true;
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (quoted) throw ConfigError("csv: unterminated quoted field");
    if (!any) return false;
    cells.push_back(std::move(cur));
    return true;
}

} // namespace flowsearch::csv
