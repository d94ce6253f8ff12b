#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "paee/error.hpp"

namespace paee::csv {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::missing_file, "cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(errc::io_error, "cannot write file: " + path);
    out << content;
    if (!out) throw Error(errc::io_error, "write failed: " + path);
}

/// Splits on '\n', tolerating a trailing newline and CRLF endings.
inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        pos = nl + 1;
    }
    return lines;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        std::size_t c = line.find(',', pos);
        if (c == std::string_view::npos) {
            fields.push_back(line.substr(pos));
            break;
        }
        fields.push_back(line.substr(pos, c - pos));
        pos = c + 1;
    }
    return fields;
}

inline double parse_double(std::string_view f, std::size_t line_no) {
    char buf[64];
    if (f.empty() || f.size() >= sizeof(buf))
        throw Error(errc::malformed_row, "bad numeric field at line " + std::to_string(line_no));
    std::memcpy(buf, f.data(), f.size());
    buf[f.size()] = '\0';
    char* end = nullptr;
    const double v = std::strtod(buf, &end);
    if (end != buf + f.size())
        throw Error(errc::malformed_row, "bad numeric field at line " + std::to_string(line_no));
    return v;
}

/// Fixed-point formatter used by every CSV writer; idempotent under
/// parse -> format, which is what the round-trip guarantees rely on.
inline void append_fixed(std::string& out, double v, int decimals = 6) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    out += buf;
}

inline std::string format_fixed(double v, int decimals = 6) {
    std::string s;
    append_fixed(s, v, decimals);
    return s;
}

/// Shortest-ish representation that still round-trips a double exactly.
inline std::string format_full(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace paee::csv
