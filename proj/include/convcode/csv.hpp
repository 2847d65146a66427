// Copyright 2026 The convcode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace convcode::csv {

/// RFC 4180 parse over a whole document. Quoted fields may contain commas,
/// quotes ("" escape) and newlines. Accepts LF and CRLF row endings.
inline std::vector<std::vector<std::string>> parse(std::string_view data) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;

    auto end_field = [&] {
        row.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(row);
        row.clear();
    };

    for (size_t i = 0; i < data.size(); ++i) {
        char c = data[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < data.size() && data[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty()) throw std::runtime_error("csv: stray quote inside unquoted field");
                quoted = true;
                field_started = true;
                break;
            case ',':
                end_field();
                field_started = true;
                break;
            case '\r':
                if (i + 1 < data.size() && data[i + 1] == '\n') ++i;
                end_row();
                break;
            case '\n':
                end_row();
                break;
            default:
                field.push_back(c);
        }
    }
    if (quoted) throw std::runtime_error("csv: unterminated quoted field");
    if (!field.empty() || field_started || !row.empty()) end_row();
    return rows;
}

inline std::string quote_field(std::string_view f) {
    bool needs = f.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!needs) return std::string(f);
    std::string out;
    out.reserve(f.size() + 2);
    out.push_back('"');
    for (char c : f) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string format_row(const std::vector<std::string>& fields) {
    std::string out;
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += quote_field(fields[i]);
    }
    out.push_back('\n');
    return out;
}

}  // namespace convcode::csv
