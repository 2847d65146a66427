// Copyright 2026 The convcode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace convcode::text {

inline bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Collapse runs of whitespace to single spaces and trim the ends.
inline std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_ws = true;  // leading whitespace dropped
    for (char c : s) {
        if (is_space(c)) {
            in_ws = true;
        } else {
            if (in_ws && !out.empty()) out.push_back(' ');
            out.push_back(c);
            in_ws = false;
        }
    }
    return out;
}

/// CRLF and lone CR become LF. The only byte-level rewrite applied to input text.
inline std::string normalize_line_endings(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r') {
            out.push_back('\n');
            if (i + 1 < s.size() && s[i + 1] == '\n') ++i;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

inline std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    size_t start = 0;
    for (size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == '\n') {
            lines.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

inline bool is_valid_utf8(std::string_view s) {
    size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        size_t need;
        if (c < 0x80) { i += 1; continue; }
        else if ((c & 0xE0) == 0xC0) { need = 1; if (c < 0xC2) return false; }
        else if ((c & 0xF0) == 0xE0) { need = 2; }
        else if ((c & 0xF8) == 0xF0) { need = 3; if (c > 0xF4) return false; }
        else return false;
        for (size_t k = 1; k <= need; ++k) {
            if (i + k >= s.size()) return false;
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
        }
        i += need + 1;
    }
    return true;
}

/// Whitespace-delimited token count.
inline long long word_count(std::string_view s) {
    long long n = 0;
    bool in_word = false;
    for (char c : s) {
        if (is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            ++n;
            in_word = true;
        }
    }
    return n;
}

/// Canonical form for fuzzy comparison: lowercased, ASCII punctuation removed,
/// whitespace collapsed. Bytes >= 0x80 pass through untouched.
inline std::string normalize_for_match(std::string_view s) {
    std::string keep;
    keep.reserve(s.size());
    for (char c : s) {
        unsigned char u = static_cast<unsigned char>(c);
        if (u >= 0x80 || std::isalnum(u) || is_space(c)) {
            keep.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : c);
        }
    }
    return collapse_whitespace(keep);
}

inline size_t levenshtein(std::string_view a, std::string_view b) {
    if (a.size() > b.size()) std::swap(a, b);
    std::vector<size_t> prev(a.size() + 1), cur(a.size() + 1);
    for (size_t i = 0; i <= a.size(); ++i) prev[i] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
        cur[0] = j;
        for (size_t i = 1; i <= a.size(); ++i) {
            size_t sub = prev[i - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[i] = std::min({prev[i] + 1, cur[i - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[a.size()];
}

/// Normalized edit similarity in [0,1] over normalize_for_match forms.
/// Two empty strings compare as identical.
inline double similarity(std::string_view a, std::string_view b) {
    std::string na = normalize_for_match(a);
    std::string nb = normalize_for_match(b);
    size_t m = std::max(na.size(), nb.size());
    if (m == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(na, nb)) / static_cast<double>(m);
}

/// FNV-1a, used to key mock-script entries by prompt.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string fnv1a64_hex(std::string_view s) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a64(s);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

}  // namespace convcode::text
