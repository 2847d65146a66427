// Copyright 2026 The convcode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "convcode/csv.hpp"
#include "convcode/text.hpp"

namespace convcode {

struct SpeakingTurn {
    int turn_index = 0;       // contiguous, 0-based
    std::string speaker;      // free-text role label, e.g. "Buyer"
    std::string text;         // raw utterance, line endings normalized
};

struct SentenceUnit {
    int sentence_index = 0;   // contiguous, 0-based over the whole transcript
    int turn_index = 0;       // owning turn
    std::string speaker;
    std::string text;         // whitespace-collapsed sentence text
};

struct Transcript {
    std::string transcript_id;
    std::optional<std::string> simulation_name;
    std::vector<SpeakingTurn> turns;
    std::vector<SentenceUnit> sentences;  // derived from turns via split_sentences
};

/// A contiguous slice of units handed to the model in one prompt. Preamble
/// turns are conversational context only and are never coded.
struct Segment {
    int segment_index = 0;
    std::vector<SentenceUnit> sentences;
    std::vector<SpeakingTurn> context_preamble;  // up to 2 turns before the slice
};

enum class TranscriptFormat { LabeledLines, TurnCsv };

enum class UnitOfAnalysis { Sentence, SpeakingTurn, ThoughtUnit };

inline std::string to_string(UnitOfAnalysis u) {
    switch (u) {
        case UnitOfAnalysis::Sentence: return "sentence";
        case UnitOfAnalysis::SpeakingTurn: return "speaking-turn";
        case UnitOfAnalysis::ThoughtUnit: return "thought-unit";
    }
    return "sentence";
}

inline UnitOfAnalysis unit_of_analysis_from_string(std::string_view s) {
    if (s == "sentence") return UnitOfAnalysis::Sentence;
    if (s == "speaking-turn") return UnitOfAnalysis::SpeakingTurn;
    if (s == "thought-unit") return UnitOfAnalysis::ThoughtUnit;
    throw std::invalid_argument("unknown unit of analysis: " + std::string(s));
}

namespace detail {

// Tokens that end with a period without ending a sentence. Checked lowercase.
inline const std::set<std::string>& abbreviation_set() {
    static const std::set<std::string> abbrevs = {
        "mr", "mrs", "ms", "dr", "prof", "st", "sr", "jr", "vs", "etc",
        "e.g", "i.e", "inc", "ltd", "co", "approx", "a.m", "p.m",
    };
    return abbrevs;
}

// Word immediately before position `dot` (exclusive), stripped of leading
// punctuation, lowercased. "Ask Mr." -> "mr"; "(e.g." -> "e.g".
inline std::string word_before(std::string_view s, size_t dot) {
    size_t end = dot;
    size_t begin = end;
    while (begin > 0 && !text::is_space(s[begin - 1])) --begin;
    while (begin < end && !std::isalnum(static_cast<unsigned char>(s[begin])) &&
           static_cast<unsigned char>(s[begin]) < 0x80)
        ++begin;
    return text::to_lower(s.substr(begin, end - begin));
}

inline bool is_abbreviation_period(std::string_view s, size_t dot) {
    std::string w = word_before(s, dot);
    if (w.empty()) return false;
    if (w.size() == 1 && std::isalpha(static_cast<unsigned char>(w[0]))) return true;  // initials: "J."
    return abbreviation_set().count(w) > 0;
}

}  // namespace detail

/// Split text into sentences. Boundaries sit at '.', '?' or '!' followed by
/// whitespace or end of text; the terminator stays with its sentence. Periods
/// between digits and after known abbreviations or single letters do not end
/// a sentence. Text without any terminator comes back as one sentence.
/// Resulting sentences are whitespace-collapsed; total function.
inline std::vector<std::string> split_sentences(std::string_view input) {
    std::vector<std::string> out;
    size_t start = 0;
    for (size_t i = 0; i < input.size(); ++i) {
        char c = input[i];
        if (c != '.' && c != '?' && c != '!') continue;
        // A terminator ends a sentence only before whitespace or end of text,
        // which also keeps decimals like 10.50 intact.
        if (i + 1 < input.size() && !text::is_space(input[i + 1])) continue;
        if (c == '.' && detail::is_abbreviation_period(input, i)) continue;
        std::string sentence = text::collapse_whitespace(input.substr(start, i + 1 - start));
        if (!sentence.empty()) out.push_back(std::move(sentence));
        start = i + 1;
    }
    std::string tail = text::collapse_whitespace(input.substr(start));
    if (!tail.empty()) out.push_back(std::move(tail));
    return out;
}

/// Rebuild the derived sentence list from the turns. Idempotent.
inline void resplit_sentences(Transcript& t) {
    t.sentences.clear();
    int idx = 0;
    for (const SpeakingTurn& turn : t.turns) {
        for (std::string& s : split_sentences(turn.text)) {
            t.sentences.push_back({idx++, turn.turn_index, turn.speaker, std::move(s)});
        }
    }
}

namespace detail {

inline Transcript parse_labeled_lines(std::string_view data, std::string transcript_id) {
    Transcript t;
    t.transcript_id = std::move(transcript_id);
    int line_no = 0;
    for (const std::string& raw : text::split_lines(data)) {
        ++line_no;
        std::string line = text::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        // First unescaped ':' separates speaker from utterance; "\:" escapes.
        size_t sep = std::string::npos;
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] == ':' && (i == 0 || line[i - 1] != '\\')) { sep = i; break; }
        }
        if (sep == std::string::npos) {
            throw std::runtime_error("labeled-lines: no speaker separator on line " +
                                     std::to_string(line_no) + ": " + line);
        }
        std::string speaker = text::trim(line.substr(0, sep));
        std::string unescaped;
        for (size_t i = 0; i < speaker.size(); ++i) {
            if (speaker[i] == '\\' && i + 1 < speaker.size() && speaker[i + 1] == ':') continue;
            unescaped.push_back(speaker[i]);
        }
        std::string utterance = text::trim(line.substr(sep + 1));
        if (unescaped.empty()) {
            throw std::runtime_error("labeled-lines: empty speaker on line " + std::to_string(line_no));
        }
        if (utterance.empty()) continue;
        t.turns.push_back({static_cast<int>(t.turns.size()), std::move(unescaped), std::move(utterance)});
    }
    return t;
}

inline Transcript parse_turn_csv(std::string_view data, std::string transcript_id) {
    auto rows = csv::parse(data);
    if (rows.empty()) throw std::runtime_error("turn-csv: empty file");
    const auto& header = rows[0];
    if (header.size() < 3 || text::to_lower(text::trim(header[0])) != "turn_id" ||
        text::to_lower(text::trim(header[1])) != "speaker" ||
        text::to_lower(text::trim(header[2])) != "text") {
        throw std::runtime_error("turn-csv: header must be turn_id,speaker,text");
    }
    Transcript t;
    t.transcript_id = std::move(transcript_id);
    for (size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && text::trim(row[0]).empty()) continue;
        if (row.size() < 3) {
            throw std::runtime_error("turn-csv: row " + std::to_string(r + 1) + " has fewer than 3 fields");
        }
        std::string speaker = text::trim(row[1]);
        std::string body = text::trim(text::normalize_line_endings(row[2]));
        if (speaker.empty()) throw std::runtime_error("turn-csv: empty speaker on row " + std::to_string(r + 1));
        if (body.empty()) continue;
        t.turns.push_back({static_cast<int>(t.turns.size()), std::move(speaker), std::move(body)});
    }
    return t;
}

}  // namespace detail

/// Parse a transcript document. Input must be UTF-8; text is preserved apart
/// from line-ending normalization. Derived sentences are attached.
inline Transcript parse_transcript(std::string_view data, TranscriptFormat format,
                                   std::string transcript_id = "transcript") {
    if (!text::is_valid_utf8(data)) throw std::runtime_error("transcript: input is not valid UTF-8");
    std::string normalized = text::normalize_line_endings(data);
    Transcript t = format == TranscriptFormat::LabeledLines
                       ? detail::parse_labeled_lines(normalized, std::move(transcript_id))
                       : detail::parse_turn_csv(normalized, std::move(transcript_id));
    if (t.turns.empty()) throw std::runtime_error("transcript: no speaking turns found (empty file?)");
    resplit_sentences(t);
    return t;
}

inline std::string serialize_transcript(const Transcript& t, TranscriptFormat format) {
    std::string out;
    if (format == TranscriptFormat::LabeledLines) {
        for (const auto& turn : t.turns) {
            std::string speaker = turn.speaker;
            std::string escaped;
            for (char c : speaker) {
                if (c == ':') escaped += "\\:";
                else escaped.push_back(c);
            }
            out += escaped + ": " + text::collapse_whitespace(turn.text) + "\n";
        }
    } else {
        out += "turn_id,speaker,text\n";
        for (const auto& turn : t.turns) {
            out += csv::format_row({std::to_string(turn.turn_index + 1), turn.speaker, turn.text});
        }
    }
    return out;
}

/// The codable units for a given unit of analysis. Sentence mode uses the
/// derived sentence list; speaking-turn and thought-unit modes treat each
/// input turn (row) as one unit. Thought units must arrive pre-segmented,
/// one per row.
inline std::vector<SentenceUnit> units_for(const Transcript& t, UnitOfAnalysis unit) {
    if (unit == UnitOfAnalysis::Sentence) return t.sentences;
    std::vector<SentenceUnit> units;
    units.reserve(t.turns.size());
    for (const auto& turn : t.turns) {
        units.push_back({turn.turn_index, turn.turn_index, turn.speaker,
                         text::collapse_whitespace(turn.text)});
    }
    return units;
}

namespace detail {

// Contiguous runs of units sharing a turn, each run already capped at
// max_units (oversized turns are pre-split as evenly as possible).
struct UnitChunk {
    size_t begin = 0;  // index into the unit vector
    size_t count = 0;
};

inline std::vector<UnitChunk> chunk_units(const std::vector<SentenceUnit>& units, size_t max_units) {
    std::vector<UnitChunk> chunks;
    size_t i = 0;
    while (i < units.size()) {
        size_t j = i;
        while (j < units.size() && units[j].turn_index == units[i].turn_index) ++j;
        size_t run = j - i;
        if (run <= max_units) {
            chunks.push_back({i, run});
        } else {
            size_t parts = (run + max_units - 1) / max_units;
            size_t base = run / parts, extra = run % parts;
            size_t at = i;
            for (size_t p = 0; p < parts; ++p) {
                size_t len = base + (p < extra ? 1 : 0);
                chunks.push_back({at, len});
                at += len;
            }
        }
        i = j;
    }
    return chunks;
}

}  // namespace detail

/// Partition units into ordered segments of at most max_units each, splitting
/// at turn boundaries where possible and balancing segment sizes. Segments
/// after the first receive up to context_turns preceding turns as a
/// non-codable preamble.
inline std::vector<Segment> segment_units(const std::vector<SentenceUnit>& units,
                                          size_t max_units = 100, size_t context_turns = 2) {
    if (max_units < 1) throw std::invalid_argument("segment: max_units must be >= 1");
    std::vector<Segment> segments;
    if (units.empty()) return segments;

    auto chunks = detail::chunk_units(units, max_units);
    const size_t n = units.size();

    // Minimum achievable segment count under the cap: greedy fill.
    size_t min_segments = 0;
    {
        size_t fill = 0;
        for (const auto& c : chunks) {
            if (fill == 0 || fill + c.count > max_units) {
                ++min_segments;
                fill = c.count;
            } else {
                fill += c.count;
            }
        }
    }

    // Choose chunk boundaries near the balanced ideal, subject to the cap and
    // to the suffix still packing into the remaining segment count.
    std::vector<size_t> cum(chunks.size() + 1, 0);
    for (size_t i = 0; i < chunks.size(); ++i) cum[i + 1] = cum[i] + chunks[i].count;

    // suffix_min[e]: minimum segments needed for chunks[e..); greedy fill is
    // optimal for contiguous partitions under a cap.
    std::vector<size_t> suffix_min(chunks.size() + 1, 0);
    for (size_t e = chunks.size(); e-- > 0;) {
        size_t j = e;
        while (j < chunks.size() && cum[j + 1] - cum[e] <= max_units) ++j;
        suffix_min[e] = 1 + suffix_min[j];
    }

    std::vector<size_t> bounds;  // exclusive chunk indices ending each segment
    size_t prev = 0;
    for (size_t seg = 0; seg + 1 < min_segments; ++seg) {
        size_t remaining_segments = min_segments - seg - 1;
        double ideal = static_cast<double>(n) * static_cast<double>(seg + 1) /
                       static_cast<double>(min_segments);
        size_t best = 0;
        double best_err = 0;
        bool found = false;
        for (size_t e = prev + 1; e + remaining_segments <= chunks.size(); ++e) {
            if (cum[e] - cum[prev] > max_units) break;
            if (suffix_min[e] > remaining_segments) continue;
            double err = std::abs(static_cast<double>(cum[e]) - ideal);
            if (!found || err < best_err) {
                best = e;
                best_err = err;
                found = true;
            }
        }
        if (!found) throw std::logic_error("segment: packing failure");
        bounds.push_back(best);
        prev = best;
    }
    bounds.push_back(chunks.size());

    size_t chunk_at = 0;
    for (size_t seg = 0; seg < bounds.size(); ++seg) {
        Segment s;
        s.segment_index = static_cast<int>(seg);
        size_t unit_begin = chunks[chunk_at].begin;
        size_t unit_end = bounds[seg] < chunks.size() ? chunks[bounds[seg]].begin
                                                      : chunks.back().begin + chunks.back().count;
        for (size_t u = unit_begin; u < unit_end; ++u) s.sentences.push_back(units[u]);
        if (seg > 0 && context_turns > 0) {
            // Group the units just before this segment by turn; take the last
            // few groups so an intra-turn split still yields usable context.
            std::vector<SpeakingTurn> preamble;
            size_t u = unit_begin;
            while (u > 0 && preamble.size() < context_turns) {
                size_t e = u;
                int turn = units[u - 1].turn_index;
                while (u > 0 && units[u - 1].turn_index == turn) --u;
                SpeakingTurn ctx;
                ctx.turn_index = turn;
                ctx.speaker = units[u].speaker;
                for (size_t k = u; k < e; ++k) {
                    if (!ctx.text.empty()) ctx.text += ' ';
                    ctx.text += units[k].text;
                }
                preamble.insert(preamble.begin(), std::move(ctx));
            }
            s.context_preamble = std::move(preamble);
        }
        segments.push_back(std::move(s));
        chunk_at = bounds[seg];
    }
    return segments;
}

/// Segment the transcript's sentence units. Preamble turns never count
/// toward the max_sentences cap.
inline std::vector<Segment> segment_transcript(const Transcript& t, size_t max_sentences = 100,
                                               size_t context_turns = 2) {
    return segment_units(t.sentences, max_sentences, context_turns);
}

}  // namespace convcode
