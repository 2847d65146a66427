// Copyright 2026 The convcode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "convcode/csv.hpp"
#include "convcode/text.hpp"
#include "convcode/transcript.hpp"

namespace convcode {

struct ExampleSentence {
    std::string sentence;
    std::optional<std::string> note;

    bool operator==(const ExampleSentence&) const = default;
};

struct Code {
    std::string code_id;            // short stable identifier, unique per scheme
    std::string label;              // display name shown in prompts
    std::string definition;
    std::string extra_instructions; // appended for frequently-confused codes
    std::vector<ExampleSentence> example_sentences;

    bool operator==(const Code&) const = default;
};

struct CodingScheme {
    std::string scheme_id;
    std::string name;
    UnitOfAnalysis unit_of_analysis = UnitOfAnalysis::Sentence;
    std::vector<Code> codes;
    bool has_other = false;
    std::map<std::string, std::vector<std::string>> supplements;  // code_id -> sentences

    bool operator==(const CodingScheme&) const = default;

    const Code* find(const std::string& code_id) const {
        for (const auto& c : codes) {
            if (c.code_id == code_id) return &c;
        }
        return nullptr;
    }
};

/// One unit's code, by one coder. unit_index is the index of the active unit
/// of analysis (sentence_index or turn_index).
struct CodedUnit {
    std::string transcript_id;
    int unit_index = 0;
    std::string code_id;
    std::string coder_id = "human";
};

// Categorization degrades beyond roughly ten to twenty codes, so more than 20
// warns and more than 25 refuses.
inline constexpr size_t kSchemeSoftCodeLimit = 20;
inline constexpr size_t kSchemeHardCodeLimit = 25;
inline constexpr size_t kExemplarTranscriptCap = 5;
inline constexpr int kDefaultExampleFloor = 15;

/// Hard validation; returns soft warnings. Throws on duplicate ids, empty
/// labels/definitions, or a code count outside [2, 25].
inline std::vector<std::string> validate_scheme(const CodingScheme& s) {
    std::vector<std::string> warnings;
    if (s.scheme_id.empty()) throw std::runtime_error("scheme: scheme_id must be non-empty");
    if (s.codes.size() < 2 || s.codes.size() > kSchemeHardCodeLimit) {
        throw std::runtime_error("scheme '" + s.scheme_id + "': code count " +
                                 std::to_string(s.codes.size()) + " outside supported range [2, " +
                                 std::to_string(kSchemeHardCodeLimit) + "]");
    }
    if (s.codes.size() > kSchemeSoftCodeLimit) {
        warnings.push_back("scheme '" + s.scheme_id + "' has " + std::to_string(s.codes.size()) +
                           " codes; categorization quality tends to drop beyond " +
                           std::to_string(kSchemeSoftCodeLimit));
    }
    std::set<std::string> seen;
    for (const auto& c : s.codes) {
        if (c.code_id.empty()) throw std::runtime_error("scheme: empty code id");
        if (!seen.insert(c.code_id).second) {
            throw std::runtime_error("scheme '" + s.scheme_id + "': duplicate code id '" + c.code_id + "'");
        }
        if (c.label.empty()) throw std::runtime_error("scheme: code '" + c.code_id + "' has empty label");
        if (c.definition.empty()) {
            throw std::runtime_error("scheme: code '" + c.code_id + "' has empty definition");
        }
    }
    for (const auto& [code_id, sentences] : s.supplements) {
        if (!s.find(code_id)) {
            throw std::runtime_error("scheme '" + s.scheme_id + "': supplements for unknown code '" +
                                     code_id + "'");
        }
        (void)sentences;
    }
    return warnings;
}

inline nlohmann::json scheme_to_json(const CodingScheme& s) {
    nlohmann::json codes = nlohmann::json::array();
    for (const auto& c : s.codes) {
        nlohmann::json jc;
        jc["id"] = c.code_id;
        jc["label"] = c.label;
        jc["definition"] = c.definition;
        if (!c.extra_instructions.empty()) jc["extra_instructions"] = c.extra_instructions;
        nlohmann::json ex = nlohmann::json::array();
        for (const auto& e : c.example_sentences) {
            if (e.note) {
                ex.push_back({{"text", e.sentence}, {"note", *e.note}});
            } else {
                ex.push_back(e.sentence);
            }
        }
        if (!ex.empty()) jc["examples"] = ex;
        codes.push_back(jc);
    }
    nlohmann::json j;
    j["scheme_id"] = s.scheme_id;
    j["name"] = s.name;
    j["unit_of_analysis"] = to_string(s.unit_of_analysis);
    j["has_other"] = s.has_other;
    j["codes"] = codes;
    if (!s.supplements.empty()) j["supplements"] = s.supplements;
    return j;
}

inline std::string serialize_scheme(const CodingScheme& s) {
    return scheme_to_json(s).dump(2) + "\n";
}

/// Parse and validate a scheme document. Soft warnings are appended to
/// *warnings when given.
inline CodingScheme load_scheme(std::string_view json_text, std::vector<std::string>* warnings = nullptr) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("scheme: invalid JSON: ") + e.what());
    }
    CodingScheme s;
    try {
        s.scheme_id = j.at("scheme_id").get<std::string>();
        s.name = j.value("name", s.scheme_id);
        s.unit_of_analysis = unit_of_analysis_from_string(j.value("unit_of_analysis", "sentence"));
        s.has_other = j.value("has_other", false);
        for (const auto& jc : j.at("codes")) {
            Code c;
            c.code_id = jc.at("id").get<std::string>();
            c.label = jc.at("label").get<std::string>();
            c.definition = jc.at("definition").get<std::string>();
            c.extra_instructions = jc.value("extra_instructions", "");
            if (jc.contains("examples")) {
                for (const auto& je : jc["examples"]) {
                    if (je.is_string()) {
                        c.example_sentences.push_back({je.get<std::string>(), std::nullopt});
                    } else {
                        c.example_sentences.push_back(
                            {je.at("text").get<std::string>(),
                             je.contains("note") ? std::optional(je["note"].get<std::string>())
                                                 : std::nullopt});
                    }
                }
            }
            s.codes.push_back(std::move(c));
        }
        if (j.contains("supplements")) {
            s.supplements = j["supplements"].get<std::map<std::string, std::vector<std::string>>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("scheme: missing or malformed field: ") + e.what());
    }
    auto w = validate_scheme(s);
    if (warnings) warnings->insert(warnings->end(), w.begin(), w.end());
    return s;
}

/// Per-code counts over an annotation list. Every scheme code reports, absent
/// ones as zero; unknown code ids throw.
inline std::map<std::string, long long> code_frequencies(const std::vector<CodedUnit>& annotations,
                                                         const CodingScheme& scheme) {
    std::map<std::string, long long> counts;
    for (const auto& c : scheme.codes) counts[c.code_id] = 0;
    for (const auto& a : annotations) {
        auto it = counts.find(a.code_id);
        if (it == counts.end()) {
            throw std::runtime_error("annotations: unknown code id '" + a.code_id + "' for scheme '" +
                                     scheme.scheme_id + "'");
        }
        ++it->second;
    }
    return counts;
}

struct CodedTranscript {
    Transcript transcript;
    std::vector<CodedUnit> annotations;
};

enum class ExemplarMode { IdealSentences, CodedTranscripts };

/// The learning material placed in the prompt: either per-code ideal
/// sentences or up to five human-coded transcripts, plus any per-code
/// supplement sentences from the scheme file.
struct ExemplarSet {
    ExemplarMode mode = ExemplarMode::IdealSentences;
    std::vector<CodedTranscript> transcripts;
    std::map<std::string, std::vector<std::string>> ideal_sentences;  // code_id -> sentences
    std::map<std::string, std::vector<std::string>> supplements;      // code_id -> sentences

    static ExemplarSet from_ideal(const CodingScheme& scheme) {
        ExemplarSet e;
        e.mode = ExemplarMode::IdealSentences;
        for (const auto& c : scheme.codes) {
            for (const auto& ex : c.example_sentences) {
                e.ideal_sentences[c.code_id].push_back(ex.sentence);
            }
        }
        e.supplements = scheme.supplements;
        return e;
    }

    static ExemplarSet from_coded(std::vector<CodedTranscript> transcripts, const CodingScheme& scheme) {
        if (transcripts.empty() || transcripts.size() > kExemplarTranscriptCap) {
            throw std::runtime_error("exemplars: need 1 to " + std::to_string(kExemplarTranscriptCap) +
                                     " coded transcripts, got " + std::to_string(transcripts.size()));
        }
        for (const auto& ct : transcripts) {
            for (const auto& a : ct.annotations) {
                if (!scheme.find(a.code_id)) {
                    throw std::runtime_error("exemplars: transcript '" + ct.transcript.transcript_id +
                                             "' uses unknown code '" + a.code_id + "'");
                }
            }
        }
        ExemplarSet e;
        e.mode = ExemplarMode::CodedTranscripts;
        e.transcripts = std::move(transcripts);
        e.supplements = scheme.supplements;
        return e;
    }
};

struct CodeDeficit {
    std::string code_id;
    long long natural = 0;     // examples occurring in the exemplar transcripts
    long long supplement = 0;  // hand-written sentences from the scheme file
    long long deficit = 0;     // floor - (natural + supplement)
};

/// Codes whose exemplar material falls short of the per-code example floor.
/// Only meaningful for coded-transcripts exemplars.
inline std::vector<CodeDeficit> find_underrepresented(const ExemplarSet& exemplars,
                                                      const CodingScheme& scheme,
                                                      int floor = kDefaultExampleFloor) {
    if (exemplars.mode != ExemplarMode::CodedTranscripts) {
        throw std::invalid_argument("find_underrepresented requires coded-transcripts exemplars");
    }
    if (floor < 1) throw std::invalid_argument("floor must be positive");
    std::map<std::string, long long> natural;
    for (const auto& c : scheme.codes) natural[c.code_id] = 0;
    for (const auto& ct : exemplars.transcripts) {
        for (const auto& [code_id, n] : code_frequencies(ct.annotations, scheme)) natural[code_id] += n;
    }
    std::vector<CodeDeficit> out;
    for (const auto& c : scheme.codes) {
        long long supp = 0;
        auto it = exemplars.supplements.find(c.code_id);
        if (it != exemplars.supplements.end()) supp = static_cast<long long>(it->second.size());
        long long total = natural[c.code_id] + supp;
        if (total < floor) {
            out.push_back({c.code_id, natural[c.code_id], supp, floor - total});
        }
    }
    return out;
}

/// Annotation CSV: header `transcript_id,unit_index,code_id,coder_id`; the
/// coder column may be empty ("human"). Codes are checked against the scheme
/// when one is supplied.
inline std::vector<CodedUnit> load_annotations(std::string_view csv_text,
                                               const CodingScheme* scheme = nullptr) {
    auto rows = csv::parse(csv_text);
    if (rows.empty()) throw std::runtime_error("annotations: empty file");
    const auto& h = rows[0];
    if (h.size() < 3 || text::to_lower(text::trim(h[0])) != "transcript_id" ||
        text::to_lower(text::trim(h[1])) != "unit_index" ||
        text::to_lower(text::trim(h[2])) != "code_id") {
        throw std::runtime_error("annotations: header must be transcript_id,unit_index,code_id[,coder_id]");
    }
    std::vector<CodedUnit> out;
    for (size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && text::trim(row[0]).empty()) continue;
        if (row.size() < 3) throw std::runtime_error("annotations: short row " + std::to_string(r + 1));
        CodedUnit u;
        u.transcript_id = text::trim(row[0]);
        try {
            u.unit_index = std::stoi(text::trim(row[1]));
        } catch (const std::exception&) {
            throw std::runtime_error("annotations: bad unit_index on row " + std::to_string(r + 1));
        }
        u.code_id = text::trim(row[2]);
        u.coder_id = row.size() > 3 && !text::trim(row[3]).empty() ? text::trim(row[3]) : "human";
        if (scheme && !scheme->find(u.code_id)) {
            throw std::runtime_error("annotations: unknown code '" + u.code_id + "' on row " +
                                     std::to_string(r + 1));
        }
        out.push_back(std::move(u));
    }
    return out;
}

inline std::string serialize_annotations(const std::vector<CodedUnit>& annotations) {
    std::string out = "transcript_id,unit_index,code_id,coder_id\n";
    for (const auto& a : annotations) {
        out += csv::format_row({a.transcript_id, std::to_string(a.unit_index), a.code_id, a.coder_id});
    }
    return out;
}

/// The 19-code simplified Jäckel scheme bundled with the tool, with its
/// sample sentences attached to their codes.
inline CodingScheme builtin_jackel19() {
    CodingScheme s;
    s.scheme_id = "jackel19";
    s.name = "Jäckel simplified negotiation coding scheme (19 codes)";
    s.unit_of_analysis = UnitOfAnalysis::Sentence;
    s.has_other = true;
    auto add = [&s](const char* id, const char* label, const char* definition) -> Code& {
        s.codes.push_back({id, label, definition, "", {}});
        return s.codes.back();
    };
    add("providing_positional_information", "Providing positional information",
        "Stating one's own position, demand, or the terms one is asking for on an issue.");
    add("asking_positional_information", "Asking positional information",
        "Asking the counterpart to state their position, demand, or terms.")
        .example_sentences.push_back({"What is the maximum price you can pay for these materials?", std::nullopt});
    add("providing_priority_information", "Providing priority-related information",
        "Revealing which issues matter most or least to one's own side.")
        .example_sentences.push_back(
            {"We prioritize growth and expansion over maintaining a conservative business model.", std::nullopt});
    add("asking_priority_information", "Asking for priority-related information",
        "Asking which issues matter most or least to the counterpart.");
    add("providing_preference_information", "Providing preference-related information",
        "Revealing one's own likes, dislikes, or preferred outcomes within an issue.");
    add("asking_preference_information", "Asking for preference-related information",
        "Asking about the counterpart's likes, dislikes, or preferred outcomes within an issue.");
    add("clarification", "Clarification",
        "Restating, checking, or querying earlier content so it is understood correctly.");
    add("single_issue_activity", "Single-issue activity",
        "An offer, counteroffer, or request for action concerning exactly one issue.")
        .example_sentences.push_back(
            {"Would you accept a payment of $5000 now and $5000 upon completion?", std::nullopt});
    add("multi_issue_activity", "Multi-issue activity",
        "An offer or counteroffer that packages two or more issues together.");
    add("rejecting_offer", "Rejecting Offer", "Declining an offer that is on the table.")
        .example_sentences.push_back({"I'm sorry, but this just isn't going to work for us.", std::nullopt});
    add("accepting_offer", "Accepting Offer", "Agreeing to an offer that is on the table.")
        .example_sentences.push_back({"That’s very generous of you. I accept.", std::nullopt});
    add("contentious_communication", "Contentious Communication",
        "Adversarial pressure on the counterpart. Covers: Stressing Power, Criticism, Threat, Hostility.");
    add("substantiation", "Substantiation",
        "Arguing for or against a position with reasons or evidence. Covers: Substantiation, "
        "Asking for substantiation and Rejecting substantiation.")
        .example_sentences.push_back(
            {"We can't afford to overlook the potential consequences of this decision.", std::nullopt});
    add("positive_statements", "Positive Statements",
        "Expressions of positive emotion toward the counterpart or the exchange. Covers: Positive "
        "affective reaction and Positive relationship remarks.");
    add("negative_statements", "Negative Statements",
        "Expressions of negative emotion toward the counterpart or the exchange. Covers: Negative "
        "affective reaction and Negative relationship remarks.");
    add("humor", "Humor", "Jokes or playful remarks.");
    add("active_listening", "Active listening",
        "Signals that the counterpart has been heard, such as acknowledgements or paraphrase.");
    add("procedural_comments", "Procedural comments",
        "Remarks about how the negotiation itself is being run. Covers: Procedural suggestion, "
        "Procedural discussion, Time management.");
    add("other", "Other", "Residual category for units that no other code fits.");
    return s;
}

/// Resolve a --scheme argument: a registered builtin name, else a file path.
inline const std::vector<std::string>& builtin_scheme_names() {
    static const std::vector<std::string> names = {"jackel19"};
    return names;
}

inline std::optional<CodingScheme> builtin_scheme(const std::string& name) {
    if (name == "jackel19") return builtin_jackel19();
    return std::nullopt;
}

}  // namespace convcode
