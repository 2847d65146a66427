// Copyright 2026 The convcode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "convcode/scheme.hpp"
#include "convcode/text.hpp"
#include "convcode/transcript.hpp"

namespace convcode {

struct PromptOptions {
    bool include_speaker_context = true;
    bool include_adjacent_context_instruction = true;
    bool include_case_description = false;  // measured not to help; off unless asked for
    bool use_xml_tags = false;              // measured to cost a few points; off by default
    bool use_chain_of_thought = false;      // ditto
    std::string case_description;
};

struct ModelProfile {
    std::string model_name;
    long long context_length_tokens = 0;
    long long approx_word_capacity = 0;  // never exceeds context_length_tokens
    std::string release_note;
};

/// The reference context-length table. Capacities are prompt-side totals; the
/// word column is the approximate equivalent at 0.75 words per token.
inline const std::vector<ModelProfile>& builtin_profiles() {
    static const std::vector<ModelProfile> profiles = {
        {"BERT", 512, 400, "10/2018"},
        {"GPT4", 128000, 96000, "3/2023"},
        {"Claude 1", 100000, 75000, "4/2023"},
        {"Claude 2", 200000, 150000, "11/2023"},
        {"Claude 3", 1000000, 750000, "4/2024"},
    };
    return profiles;
}

inline std::optional<ModelProfile> find_profile(const std::string& name) {
    for (const auto& p : builtin_profiles()) {
        if (text::to_lower(p.model_name) == text::to_lower(name)) return p;
    }
    return std::nullopt;
}

/// Word-count proxy for prompt size: ceil(words / 0.75). Deliberately
/// approximate; real tokenizers are model-specific.
inline long long estimate_tokens(std::string_view prompt_text) {
    long long words = text::word_count(prompt_text);
    return (4 * words + 2) / 3;
}

enum class PromptSectionKind { Instructions, Definitions, Exemplars, Supplements, Target };

inline const char* to_string(PromptSectionKind k) {
    switch (k) {
        case PromptSectionKind::Instructions: return "instructions";
        case PromptSectionKind::Definitions: return "definitions";
        case PromptSectionKind::Exemplars: return "exemplars";
        case PromptSectionKind::Supplements: return "supplements";
        case PromptSectionKind::Target: return "target";
    }
    return "?";
}

struct PromptSection {
    PromptSectionKind kind;
    size_t begin = 0;  // byte offsets into PromptText::text
    size_t end = 0;
};

struct PromptText {
    std::string text;
    std::vector<PromptSection> section_map;  // ordered, disjoint
    long long estimated_tokens = 0;

    std::string section(PromptSectionKind kind) const {
        std::string out;
        for (const auto& s : section_map) {
            if (s.kind == kind) out += text.substr(s.begin, s.end - s.begin);
        }
        return out;
    }
};

struct BudgetCheck {
    bool fits = false;
    long long estimated_tokens = 0;
    long long budget_tokens = 0;
    long long over_by_tokens = 0;  // zero when it fits
};

/// A prompt fits when its estimate stays within the context length minus the
/// reserve held back for model output.
inline BudgetCheck check_budget(const PromptText& prompt, const ModelProfile& profile,
                                double reserve_fraction = 0.25) {
    if (reserve_fraction < 0.0 || reserve_fraction >= 1.0) {
        throw std::invalid_argument("reserve_fraction must be in [0, 1)");
    }
    BudgetCheck b;
    b.estimated_tokens = prompt.estimated_tokens;
    b.budget_tokens = static_cast<long long>(
        static_cast<double>(profile.context_length_tokens) * (1.0 - reserve_fraction));
    b.fits = b.estimated_tokens <= b.budget_tokens;
    b.over_by_tokens = b.fits ? 0 : b.estimated_tokens - b.budget_tokens;
    return b;
}

namespace detail {

class PromptWriter {
public:
    explicit PromptWriter(bool xml_tags) : xml_(xml_tags) {}

    void open(PromptSectionKind kind, const char* tag) {
        if (!text_.empty()) text_ += "\n";
        begin_ = text_.size();
        kind_ = kind;
        tag_ = tag;
        if (xml_) text_ += std::string("<") + tag + ">\n";
    }

    void line(const std::string& s) { text_ += s + "\n"; }

    void close() {
        if (xml_) text_ += std::string("</") + tag_ + ">\n";
        sections_.push_back({kind_, begin_, text_.size()});
    }

    std::string take_text() { return std::move(text_); }
    std::vector<PromptSection> take_sections() { return std::move(sections_); }

private:
    bool xml_;
    std::string text_;
    std::vector<PromptSection> sections_;
    size_t begin_ = 0;
    PromptSectionKind kind_ = PromptSectionKind::Instructions;
    const char* tag_ = "";
};

inline const char* unit_noun(UnitOfAnalysis u) {
    switch (u) {
        case UnitOfAnalysis::Sentence: return "sentence";
        case UnitOfAnalysis::SpeakingTurn: return "speaking turn";
        case UnitOfAnalysis::ThoughtUnit: return "thought unit";
    }
    return "sentence";
}

}  // namespace detail

/// Assemble the full in-context prompt for one segment: instructions, the
/// output line format, code definitions, exemplar material, supplements, the
/// optional context instruction, and the numbered target segment.
///
/// Deterministic: identical inputs produce byte-identical prompts.
inline PromptText build_prompt(const CodingScheme& scheme, const ExemplarSet& exemplars,
                               const Segment& segment, const PromptOptions& opts = {},
                               int example_floor = kDefaultExampleFloor, bool allow_sparse = false) {
    if (segment.sentences.empty()) throw std::invalid_argument("prompt: segment has no units");
    if (exemplars.mode == ExemplarMode::CodedTranscripts && !allow_sparse) {
        auto deficits = find_underrepresented(exemplars, scheme, example_floor);
        if (!deficits.empty()) {
            std::string msg = "prompt: unresolved example deficits (floor " +
                              std::to_string(example_floor) + "):";
            for (const auto& d : deficits) {
                msg += " " + d.code_id + " needs " + std::to_string(d.deficit) + " more;";
            }
            msg += " add supplements or pass allow_sparse";
            throw std::runtime_error(msg);
        }
    }

    const std::string noun = detail::unit_noun(scheme.unit_of_analysis);
    detail::PromptWriter w(opts.use_xml_tags);

    w.open(PromptSectionKind::Instructions, "instructions");
    w.line("You are coding a negotiation conversation against a fixed coding scheme.");
    w.line("Assign exactly one code from the scheme to every numbered " + noun +
           " in the TARGET SEGMENT at the end of this prompt.");
    w.line("Base every choice on the code definitions and the example material below.");
    w.line("");
    w.line("For each numbered " + noun + ", output exactly one line with three fields");
    w.line("separated by \" | \": the " + noun + " number, the " + noun +
           " exactly as written, and the chosen code label.");
    w.line("Example output line: 4 | I accept your offer. | Accepting Offer");
    w.line("Output the lines in order, one per " + noun + ", with no other text before,");
    w.line("between, or after them.");
    if (opts.use_chain_of_thought) {
        w.line("After the code label, append one more \" | \" and a one-sentence explanation");
        w.line("of why that code applies.");
    }
    if (opts.include_case_description && !opts.case_description.empty()) {
        w.line("");
        w.line("CASE BACKGROUND");
        w.line(opts.case_description);
    }
    w.close();

    w.open(PromptSectionKind::Definitions, "definitions");
    w.line("CODE DEFINITIONS");
    for (size_t i = 0; i < scheme.codes.size(); ++i) {
        const Code& c = scheme.codes[i];
        w.line(std::to_string(i + 1) + ". " + c.label + ": " + c.definition);
        if (!c.extra_instructions.empty()) {
            w.line("   Additional guidance: " + c.extra_instructions);
        }
    }
    w.close();

    w.open(PromptSectionKind::Exemplars, "examples");
    if (exemplars.mode == ExemplarMode::CodedTranscripts) {
        w.line("EXAMPLE MATERIAL: human-coded transcripts");
        for (const auto& ct : exemplars.transcripts) {
            w.line("");
            w.line("Coded transcript \"" + ct.transcript.transcript_id + "\":");
            std::map<int, std::string> code_of;
            for (const auto& a : ct.annotations) {
                if (!code_of.count(a.unit_index)) code_of[a.unit_index] = a.code_id;
            }
            auto units = units_for(ct.transcript, scheme.unit_of_analysis);
            for (const auto& u : units) {
                auto it = code_of.find(u.sentence_index);
                if (it == code_of.end()) continue;
                const Code* code = scheme.find(it->second);
                w.line(std::to_string(u.sentence_index + 1) + " | " + u.speaker + " | " + u.text +
                       " | " + (code ? code->label : it->second));
            }
        }
    } else {
        w.line("EXAMPLE MATERIAL: example " + noun + "s for each code");
        for (const auto& c : scheme.codes) {
            auto it = exemplars.ideal_sentences.find(c.code_id);
            if (it == exemplars.ideal_sentences.end() || it->second.empty()) continue;
            w.line("");
            w.line("Examples of \"" + c.label + "\":");
            for (const auto& s : it->second) w.line("- " + s);
        }
    }
    w.close();

    bool any_supplements = false;
    for (const auto& c : scheme.codes) {
        auto it = exemplars.supplements.find(c.code_id);
        if (it != exemplars.supplements.end() && !it->second.empty()) any_supplements = true;
    }
    if (any_supplements) {
        w.open(PromptSectionKind::Supplements, "supplements");
        w.line("ADDITIONAL EXAMPLES for codes that occur rarely in the transcripts");
        for (const auto& c : scheme.codes) {
            auto it = exemplars.supplements.find(c.code_id);
            if (it == exemplars.supplements.end() || it->second.empty()) continue;
            w.line("");
            w.line("Additional examples of \"" + c.label + "\":");
            for (const auto& s : it->second) w.line("- " + s);
        }
        w.close();
    }

    if (opts.include_speaker_context || opts.include_adjacent_context_instruction) {
        w.open(PromptSectionKind::Instructions, "context_instructions");
        if (opts.include_speaker_context) {
            w.line("Pay attention to who is speaking (for example, buyer or seller) when you");
            w.line("choose a code.");
        }
        if (opts.include_adjacent_context_instruction) {
            w.line("Use the surrounding " + noun + "s before and after each " + noun +
                   " as context for your choice.");
        }
        w.close();
    }

    w.open(PromptSectionKind::Target, "target_segment");
    w.line("TARGET SEGMENT");
    if (!segment.context_preamble.empty()) {
        w.line("CONTEXT ONLY — do not code:");
        for (const auto& turn : segment.context_preamble) {
            w.line(turn.speaker + ": " + text::collapse_whitespace(turn.text));
        }
        w.line("");
    }
    w.line("Code these " + noun + "s:");
    for (size_t i = 0; i < segment.sentences.size(); ++i) {
        const SentenceUnit& u = segment.sentences[i];
        if (opts.include_speaker_context) {
            w.line(std::to_string(i + 1) + " | " + u.speaker + " | " + u.text);
        } else {
            w.line(std::to_string(i + 1) + " | " + u.text);
        }
    }
    w.close();

    PromptText out;
    out.text = w.take_text();
    out.section_map = w.take_sections();
    out.estimated_tokens = estimate_tokens(out.text);
    return out;
}

}  // namespace convcode
