// Copyright 2026 The convcode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "convcode/backend.hpp"
#include "convcode/prompt.hpp"
#include "convcode/scheme.hpp"
#include "convcode/transcript.hpp"

namespace convcode {

// Matching a model-output field against scheme labels: exact (normalized)
// first, then best similarity at or above this floor.
inline constexpr double kLabelMatchThreshold = 0.85;

struct ParsedLine {
    std::optional<int> claimed_index;  // 1-based prompt-local number, as echoed
    std::string echoed_sentence;
    std::string code_label;  // scheme label as matched
    std::string code_id;
};

struct ParseDiagnostic {
    enum class Kind { Unparseable, UnknownCode };
    Kind kind = Kind::Unparseable;
    int line_number = 0;  // 1-based within the model output
    std::string line;
    std::string best_guess;  // closest label candidate for unknown codes
    double best_similarity = 0.0;
};

struct ParseResult {
    std::vector<ParsedLine> lines;
    std::vector<ParseDiagnostic> diagnostics;
};

namespace detail {

struct LabelMatch {
    const Code* code = nullptr;
    double score = 0.0;
    bool exact = false;
};

inline LabelMatch match_code_field(const std::string& field, const CodingScheme& scheme) {
    std::string norm = text::normalize_for_match(field);
    if (norm.empty()) return {};
    LabelMatch best;
    for (const auto& c : scheme.codes) {
        std::string label_norm = text::normalize_for_match(c.label);
        if (norm == label_norm || norm == text::normalize_for_match(c.code_id)) {
            return {&c, 1.0, true};
        }
        double s = text::similarity(field, c.label);
        if (s > best.score) best = {&c, s, false};
    }
    return best;
}

inline std::vector<std::string> split_fields(const std::string& line, const std::string& delim) {
    std::vector<std::string> fields;
    size_t pos = 0;
    while (true) {
        size_t at = line.find(delim, pos);
        if (at == std::string::npos) {
            fields.push_back(line.substr(pos));
            break;
        }
        fields.push_back(line.substr(pos, at - pos));
        pos = at + delim.size();
    }
    for (auto& f : fields) f = text::trim(f);
    while (!fields.empty() && fields.back().empty()) fields.pop_back();
    return fields;
}

/// A field that is just an integer, give or take one bracketing punctuation
/// character on each side ("12", "12.", "(12)", "#12").
inline std::optional<int> standalone_integer(const std::string& field) {
    size_t b = 0, e = field.size();
    while (b < e && !std::isdigit(static_cast<unsigned char>(field[b]))) ++b;
    while (e > b && !std::isdigit(static_cast<unsigned char>(field[e - 1]))) --e;
    if (b == e || b > 1 || field.size() - e > 1) return std::nullopt;
    for (size_t i = 0; i < field.size(); ++i) {
        bool inside = i >= b && i < e;
        if (inside && !std::isdigit(static_cast<unsigned char>(field[i]))) return std::nullopt;
        if (!inside && std::isalnum(static_cast<unsigned char>(field[i]))) return std::nullopt;
    }
    if (e - b > 6) return std::nullopt;
    return std::stoi(field.substr(b, e - b));
}

}  // namespace detail

/// Parse one model response into coded lines, tolerating the format drift
/// real models produce: alternative delimiters, reordered fields, renumbered
/// lines. A line yields a result only when some field matches a scheme label;
/// everything else lands in diagnostics.
inline ParseResult parse_model_output(const std::string& output, const CodingScheme& scheme) {
    static const std::vector<std::string> delimiters = {"|", "\t", " - ", ","};
    ParseResult result;
    int line_no = 0;
    for (const auto& raw : text::split_lines(output)) {
        ++line_no;
        std::string line = text::trim(raw);
        if (line.empty()) continue;

        std::vector<std::string> first_split;  // best-effort split for diagnostics
        bool parsed = false;
        for (const auto& delim : delimiters) {
            auto fields = detail::split_fields(line, delim);
            if (fields.size() < 2) continue;
            if (first_split.empty()) first_split = fields;

            size_t code_at = fields.size();
            detail::LabelMatch best;
            for (size_t i = 0; i < fields.size(); ++i) {
                auto m = detail::match_code_field(fields[i], scheme);
                if (m.code && (m.exact || m.score >= kLabelMatchThreshold)) {
                    // Equal scores go to the later field: the canonical line
                    // order puts the code last, after the echoed sentence.
                    if (m.score >= best.score || (m.exact && !best.exact)) {
                        best = m;
                        code_at = i;
                    }
                }
            }
            if (code_at == fields.size()) continue;

            ParsedLine out;
            out.code_label = best.code->label;
            out.code_id = best.code->code_id;
            size_t index_at = fields.size();
            for (size_t i = 0; i < fields.size(); ++i) {
                if (i == code_at) continue;
                if (auto n = detail::standalone_integer(fields[i])) {
                    out.claimed_index = *n;
                    index_at = i;
                    break;
                }
            }
            // Remainder is the echoed sentence. When sentence material already
            // sits before the code field, anything after the code is treated
            // as trailing commentary (e.g. a chain-of-thought rationale).
            bool remainder_before_code = false;
            for (size_t i = 0; i < code_at; ++i) {
                if (i != index_at) remainder_before_code = true;
            }
            std::string echoed;
            for (size_t i = 0; i < fields.size(); ++i) {
                if (i == code_at || i == index_at) continue;
                if (remainder_before_code && i > code_at) continue;
                if (!echoed.empty()) echoed += delim == "\t" ? " " : delim + " ";
                echoed += fields[i];
            }
            echoed = text::trim(echoed);
            if (!out.claimed_index) {
                // Number glued to the sentence: "12. I accept."
                size_t d = 0;
                while (d < echoed.size() && std::isdigit(static_cast<unsigned char>(echoed[d]))) ++d;
                if (d > 0 && d <= 6 && d < echoed.size() &&
                    (echoed[d] == '.' || echoed[d] == ')' || echoed[d] == ':' || echoed[d] == ' ')) {
                    out.claimed_index = std::stoi(echoed.substr(0, d));
                    size_t rest = d + 1;
                    while (rest < echoed.size() && text::is_space(echoed[rest])) ++rest;
                    echoed = echoed.substr(rest);
                }
            }
            out.echoed_sentence = echoed;
            result.lines.push_back(std::move(out));
            parsed = true;
            break;
        }
        if (parsed) continue;

        ParseDiagnostic d;
        d.line_number = line_no;
        d.line = line;
        if (!first_split.empty()) {
            d.kind = ParseDiagnostic::Kind::UnknownCode;
            for (const auto& f : first_split) {
                auto m = detail::match_code_field(f, scheme);
                if (m.code && m.score > d.best_similarity) {
                    d.best_similarity = m.score;
                    d.best_guess = f;
                }
            }
        }
        result.diagnostics.push_back(std::move(d));
    }
    return result;
}

struct AlignResult {
    std::vector<std::optional<std::string>> codes;  // per segment unit; code_id or missing
    std::vector<int> line_binding;                  // per parsed line; unit offset or -1
    int bound_count = 0;
};

/// Bind parsed lines to segment units. A line binds to its claimed number
/// when the echoed text is similar enough; otherwise it binds to the most
/// similar unbound unit. One line per unit per run; conflicts go to the
/// higher similarity, ties to the lower index.
inline AlignResult align_run(const std::vector<ParsedLine>& parsed, const Segment& segment,
                             double similarity_threshold = 0.8) {
    const size_t n = segment.sentences.size();
    AlignResult result;
    result.codes.assign(n, std::nullopt);
    result.line_binding.assign(parsed.size(), -1);

    std::vector<bool> unit_bound(n, false);
    std::vector<bool> line_bound(parsed.size(), false);

    struct Candidate {
        size_t line;
        size_t unit;
        double sim;
    };

    // Claimed-number bindings first; the best-similar line wins each number.
    std::map<size_t, Candidate> by_unit;
    for (size_t li = 0; li < parsed.size(); ++li) {
        const auto& line = parsed[li];
        if (!line.claimed_index) continue;
        int idx = *line.claimed_index;
        if (idx < 1 || static_cast<size_t>(idx) > n) continue;
        size_t unit = static_cast<size_t>(idx - 1);
        double sim = text::similarity(line.echoed_sentence, segment.sentences[unit].text);
        if (sim < similarity_threshold) continue;
        auto it = by_unit.find(unit);
        if (it == by_unit.end() || sim > it->second.sim) by_unit[unit] = {li, unit, sim};
    }
    for (const auto& [unit, cand] : by_unit) {
        unit_bound[unit] = true;
        line_bound[cand.line] = true;
        result.codes[unit] = parsed[cand.line].code_id;
        result.line_binding[cand.line] = static_cast<int>(unit);
        ++result.bound_count;
    }

    // Fuzzy pass for the rest: greedy on similarity, ties to lower unit index
    // then input order.
    std::vector<Candidate> candidates;
    for (size_t li = 0; li < parsed.size(); ++li) {
        if (line_bound[li]) continue;
        for (size_t u = 0; u < n; ++u) {
            if (unit_bound[u]) continue;
            double sim = text::similarity(parsed[li].echoed_sentence, segment.sentences[u].text);
            if (sim >= similarity_threshold) candidates.push_back({li, u, sim});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        if (a.unit != b.unit) return a.unit < b.unit;
        return a.line < b.line;
    });
    for (const auto& c : candidates) {
        if (line_bound[c.line] || unit_bound[c.unit]) continue;
        line_bound[c.line] = true;
        unit_bound[c.unit] = true;
        result.codes[c.unit] = parsed[c.line].code_id;
        result.line_binding[c.line] = static_cast<int>(c.unit);
        ++result.bound_count;
    }
    return result;
}

enum class ConsistencyLabel { Unreported, Moderate, High, Perfect };

inline const char* to_string(ConsistencyLabel c) {
    switch (c) {
        case ConsistencyLabel::Unreported: return "Unreported";
        case ConsistencyLabel::Moderate: return "Moderate";
        case ConsistencyLabel::High: return "High";
        case ConsistencyLabel::Perfect: return "Perfect";
    }
    return "?";
}

inline ConsistencyLabel consistency_from_string(std::string_view s) {
    if (s == "Unreported") return ConsistencyLabel::Unreported;
    if (s == "Moderate") return ConsistencyLabel::Moderate;
    if (s == "High") return ConsistencyLabel::High;
    if (s == "Perfect") return ConsistencyLabel::Perfect;
    throw std::invalid_argument("unknown consistency label: " + std::string(s));
}

struct VoteResult {
    std::optional<std::string> assigned;
    ConsistencyLabel label = ConsistencyLabel::Unreported;
    int top_count = 0;
};

/// Majority vote over one unit's runs. A code must appear at least
/// `threshold` times before it is reported; missing runs never count toward
/// any code, so they lower the achievable consistency.
inline VoteResult vote(const std::vector<std::optional<std::string>>& votes, int runs = 5,
                       int threshold = 3) {
    if (runs < 1 || runs > 9) throw std::invalid_argument("vote: runs must be in [1, 9]");
    if (threshold < 1 || threshold > runs) {
        throw std::invalid_argument("vote: threshold must be in [1, runs]");
    }
    if (votes.size() > static_cast<size_t>(runs)) {
        throw std::invalid_argument("vote: more votes than runs");
    }
    std::map<std::string, int> counts;
    for (const auto& v : votes) {
        if (v) ++counts[*v];
    }
    VoteResult out;
    int qualifying = 0;
    for (const auto& [code, count] : counts) {
        out.top_count = std::max(out.top_count, count);
        if (count >= threshold) ++qualifying;
    }
    if (qualifying == 1) {
        for (const auto& [code, count] : counts) {
            if (count >= threshold) out.assigned = code;
        }
    }
    // With threshold > runs/2 at most one code can qualify; a tie between
    // qualifying codes (possible only below that) reports nothing.
    if (!out.assigned) {
        out.label = ConsistencyLabel::Unreported;
        return out;
    }
    int c = counts[*out.assigned];
    if (c == runs) {
        out.label = ConsistencyLabel::Perfect;
    } else if (c == runs - 1) {
        out.label = ConsistencyLabel::High;
    } else {
        out.label = ConsistencyLabel::Moderate;
    }
    return out;
}

struct RunVotes {
    int unit_index = 0;
    int turn_index = 0;
    std::string speaker;
    std::string text;
    std::vector<std::optional<std::string>> votes;  // one per run; code_id or missing
    std::optional<std::string> assigned;
    ConsistencyLabel consistency = ConsistencyLabel::Unreported;
};

struct SegmentOutcome {
    int segment_index = 0;
    int first_unit_index = 0;
    int unit_count = 0;
    int runs_failed = 0;
    bool failed = false;  // too few successful runs for the vote threshold
    std::string prompt_text;
    std::vector<std::string> raw_responses;  // per run; failures keep the error text
    std::vector<bool> run_ok;
    int diagnostics_count = 0;
};

struct CodedResult {
    std::string transcript_id;
    std::string scheme_id;
    UnitOfAnalysis unit_of_analysis = UnitOfAnalysis::Sentence;
    std::vector<RunVotes> rows;  // exactly one per unit, in transcript order
    std::vector<SegmentOutcome> segments;

    std::string backend_name;
    std::string model_profile;
    double temperature = 0.2;
    std::uint64_t seed = 0;
    int runs = 5;
    int vote_threshold = 3;
    double similarity_threshold = 0.8;
    std::string started_at;
    std::string finished_at;

    bool any_segment_failed() const {
        for (const auto& s : segments) {
            if (s.failed) return true;
        }
        return false;
    }

    std::map<std::string, long long> consistency_counts() const {
        std::map<std::string, long long> out = {
            {"Unreported", 0}, {"Moderate", 0}, {"High", 0}, {"Perfect", 0}};
        for (const auto& r : rows) ++out[to_string(r.consistency)];
        return out;
    }
};

struct RunnerConfig {
    int runs = 5;
    int vote_threshold = 3;
    size_t max_units_per_segment = 100;
    size_t context_turns = 2;
    double temperature = 0.2;
    std::uint64_t seed = 0;
    double similarity_threshold = 0.8;
    int max_in_flight = 5;
    int max_output_tokens = 4096;
    int example_floor = kDefaultExampleFloor;
    bool allow_sparse = false;
    PromptOptions prompt;
    std::optional<UnitOfAnalysis> unit_override;   // defaults to the scheme's unit
    std::optional<ModelProfile> budget_profile;    // prompt budget enforced when set
    double reserve_fraction = 0.25;
};

namespace detail {

inline std::string iso8601_utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace detail

/// Run the whole coding pipeline over one transcript: segment, prompt, run
/// the backend `runs` times per segment, parse, align, vote, and merge back
/// into transcript order. A failed run records `missing` for all its units;
/// a segment without enough successful runs to reach the vote threshold is
/// marked failed but still reported.
inline CodedResult code_transcript(const Transcript& t, const CodingScheme& scheme,
                                   const ExemplarSet& exemplars, const BackendConfig& backend_cfg,
                                   const RunnerConfig& rc) {
    if (rc.vote_threshold > rc.runs) throw std::invalid_argument("vote_threshold exceeds runs");

    UnitOfAnalysis unit = rc.unit_override.value_or(scheme.unit_of_analysis);
    auto units = units_for(t, unit);
    if (units.empty()) throw std::runtime_error("code: transcript has no codable units");
    auto segments = segment_units(units, rc.max_units_per_segment, rc.context_turns);

    // Every prompt is built and budget-checked before the first model call.
    std::vector<PromptText> prompts;
    prompts.reserve(segments.size());
    for (const auto& seg : segments) {
        auto p = build_prompt(scheme, exemplars, seg, rc.prompt, rc.example_floor, rc.allow_sparse);
        if (rc.budget_profile) {
            auto b = check_budget(p, *rc.budget_profile, rc.reserve_fraction);
            if (!b.fits) {
                throw std::runtime_error(
                    "prompt for segment " + std::to_string(seg.segment_index) + " exceeds the " +
                    rc.budget_profile->model_name + " budget: " + std::to_string(b.estimated_tokens) +
                    " estimated tokens > " + std::to_string(b.budget_tokens) + " available");
            }
        }
        prompts.push_back(std::move(p));
    }

    CodedResult result;
    result.transcript_id = t.transcript_id;
    result.scheme_id = scheme.scheme_id;
    result.unit_of_analysis = unit;
    result.temperature = rc.temperature;
    result.seed = rc.seed;
    result.runs = rc.runs;
    result.vote_threshold = rc.vote_threshold;
    result.similarity_threshold = rc.similarity_threshold;
    if (rc.budget_profile) result.model_profile = rc.budget_profile->model_name;
    result.started_at = detail::iso8601_utc_now();

    auto backend = make_backend(backend_cfg);
    result.backend_name = backend->name();

    for (size_t si = 0; si < segments.size(); ++si) {
        const Segment& seg = segments[si];
        SegmentOutcome outcome;
        outcome.segment_index = seg.segment_index;
        outcome.first_unit_index = seg.sentences.front().sentence_index;
        outcome.unit_count = static_cast<int>(seg.sentences.size());
        outcome.prompt_text = prompts[si].text;

        std::vector<CompletionRequest> requests;
        for (int run = 0; run < rc.runs; ++run) {
            CompletionRequest req;
            req.prompt = prompts[si].text;
            req.temperature = rc.temperature;
            req.max_output_tokens = rc.max_output_tokens;
            req.run_tag = {seg.segment_index, run};
            requests.push_back(std::move(req));
        }
        auto outcomes = complete_batch(*backend, requests, rc.max_in_flight);

        std::vector<std::vector<std::optional<std::string>>> per_run_codes;
        for (int run = 0; run < rc.runs; ++run) {
            const auto& o = outcomes[static_cast<size_t>(run)];
            bool ok = o.ok && !o.response.text.empty();
            outcome.run_ok.push_back(ok);
            if (!ok) {
                ++outcome.runs_failed;
                outcome.raw_responses.push_back(o.ok ? "" : "ERROR: " + o.error_message);
                per_run_codes.emplace_back(seg.sentences.size(), std::nullopt);
                continue;
            }
            outcome.raw_responses.push_back(o.response.text);
            auto parsed = parse_model_output(o.response.text, scheme);
            outcome.diagnostics_count += static_cast<int>(parsed.diagnostics.size());
            auto aligned = align_run(parsed.lines, seg, rc.similarity_threshold);
            per_run_codes.push_back(std::move(aligned.codes));
        }
        outcome.failed = (rc.runs - outcome.runs_failed) < rc.vote_threshold;

        for (size_t u = 0; u < seg.sentences.size(); ++u) {
            RunVotes row;
            const auto& unit_ref = seg.sentences[u];
            row.unit_index = unit_ref.sentence_index;
            row.turn_index = unit_ref.turn_index;
            row.speaker = unit_ref.speaker;
            row.text = unit_ref.text;
            for (int run = 0; run < rc.runs; ++run) {
                row.votes.push_back(per_run_codes[static_cast<size_t>(run)][u]);
            }
            auto v = vote(row.votes, rc.runs, rc.vote_threshold);
            row.assigned = v.assigned;
            row.consistency = v.label;
            result.rows.push_back(std::move(row));
        }
        result.segments.push_back(std::move(outcome));
    }
    result.finished_at = detail::iso8601_utc_now();
    return result;
}

// ---------------------------------------------------------------------------
// Coded-output artifacts.
// ---------------------------------------------------------------------------

inline std::string coded_csv(const CodedResult& r) {
    std::vector<std::string> header = {"sentence_index", "turn_index", "speaker",
                                       "text",           "assigned_code", "consistency"};
    for (int i = 1; i <= r.runs; ++i) header.push_back("vote_" + std::to_string(i));
    std::string out = csv::format_row(header);
    for (const auto& row : r.rows) {
        std::vector<std::string> fields = {
            std::to_string(row.unit_index), std::to_string(row.turn_index),
            row.speaker,                    row.text,
            row.assigned.value_or(""),      to_string(row.consistency)};
        for (const auto& v : row.votes) fields.push_back(v.value_or("missing"));
        out += csv::format_row(fields);
    }
    return out;
}

inline nlohmann::json coded_report_json(const CodedResult& r) {
    nlohmann::json j;
    j["transcript_id"] = r.transcript_id;
    j["scheme_id"] = r.scheme_id;
    j["unit_of_analysis"] = to_string(r.unit_of_analysis);
    j["backend"] = r.backend_name;
    if (!r.model_profile.empty()) j["model_profile"] = r.model_profile;
    j["temperature"] = r.temperature;
    j["seed"] = r.seed;
    j["runs"] = r.runs;
    j["vote_threshold"] = r.vote_threshold;
    j["similarity_threshold"] = r.similarity_threshold;
    j["started_at"] = r.started_at;
    j["finished_at"] = r.finished_at;
    j["consistency_counts"] = r.consistency_counts();
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : r.segments) {
        segs.push_back({{"segment_index", s.segment_index},
                        {"first_unit_index", s.first_unit_index},
                        {"unit_count", s.unit_count},
                        {"runs_failed", s.runs_failed},
                        {"failed", s.failed},
                        {"diagnostics_count", s.diagnostics_count}});
    }
    j["segments"] = segs;
    nlohmann::json units = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json ju;
        ju["unit_index"] = row.unit_index;
        ju["turn_index"] = row.turn_index;
        ju["speaker"] = row.speaker;
        ju["text"] = row.text;
        nlohmann::json votes = nlohmann::json::array();
        for (const auto& v : row.votes) votes.push_back(v ? nlohmann::json(*v) : nlohmann::json());
        ju["votes"] = votes;
        if (row.assigned) ju["assigned"] = *row.assigned;
        ju["consistency"] = to_string(row.consistency);
        units.push_back(ju);
    }
    j["units"] = units;
    return j;
}

/// Rebuild a CodedResult (sans raw archive) from a report written by
/// coded_report_json.
inline CodedResult parse_coded_report(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("report: invalid JSON: ") + e.what());
    }
    CodedResult r;
    try {
        r.transcript_id = j.at("transcript_id").get<std::string>();
        r.scheme_id = j.at("scheme_id").get<std::string>();
        r.unit_of_analysis = unit_of_analysis_from_string(j.value("unit_of_analysis", "sentence"));
        r.backend_name = j.value("backend", "");
        r.model_profile = j.value("model_profile", "");
        r.temperature = j.value("temperature", 0.2);
        r.seed = j.value("seed", 0ULL);
        r.runs = j.value("runs", 5);
        r.vote_threshold = j.value("vote_threshold", 3);
        r.similarity_threshold = j.value("similarity_threshold", 0.8);
        r.started_at = j.value("started_at", "");
        r.finished_at = j.value("finished_at", "");
        for (const auto& js : j.value("segments", nlohmann::json::array())) {
            SegmentOutcome s;
            s.segment_index = js.at("segment_index").get<int>();
            s.first_unit_index = js.at("first_unit_index").get<int>();
            s.unit_count = js.at("unit_count").get<int>();
            s.runs_failed = js.value("runs_failed", 0);
            s.failed = js.value("failed", false);
            s.diagnostics_count = js.value("diagnostics_count", 0);
            r.segments.push_back(std::move(s));
        }
        for (const auto& ju : j.at("units")) {
            RunVotes row;
            row.unit_index = ju.at("unit_index").get<int>();
            row.turn_index = ju.value("turn_index", 0);
            row.speaker = ju.value("speaker", "");
            row.text = ju.value("text", "");
            for (const auto& v : ju.at("votes")) {
                row.votes.push_back(v.is_null() ? std::nullopt
                                                : std::optional<std::string>(v.get<std::string>()));
            }
            if (ju.contains("assigned")) row.assigned = ju["assigned"].get<std::string>();
            row.consistency = consistency_from_string(ju.at("consistency").get<std::string>());
            r.rows.push_back(std::move(row));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("report: missing or malformed field: ") + e.what());
    }
    return r;
}

}  // namespace convcode
