// Copyright 2026 The convcode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "convcode/rng.hpp"
#include "convcode/text.hpp"
#include "convcode/transcript.hpp"

namespace convcode {

// ---------------------------------------------------------------------------
// Mock completion scripts. A static script maps (segment, run) or prompt-hash
// keys to literal response text. A noisy script carries per-segment ground
// truth and deterministically perturbs it per run, reproducing the failure
// modes real models exhibit on long transcripts: skipped lines, grammar
// rewrites of the echoed sentence, and occasional wrong codes. The same
// generation routine doubles as the test oracle for alignment and voting.
// ---------------------------------------------------------------------------

struct GroundTruthLine {
    std::string speaker;
    std::string sentence;
    std::string code_label;
};

struct SegmentGroundTruth {
    int segment_index = 0;
    std::vector<GroundTruthLine> lines;  // in prompt order; numbered 1..n
};

struct NoiseSpec {
    double skip_fraction = 0.0;
    double rewrite_fraction = 0.0;
    double flip_fraction = 0.0;
    std::vector<std::string> flip_labels;   // wrong-code candidates
    double min_rewrite_similarity = 0.85;   // rewrites below this revert to verbatim
};

enum class LineFate { Verbatim, Rewritten, Skipped, Flipped, RewrittenFlipped };

struct ScriptedLine {
    int number = 0;  // 1-based prompt-local number
    LineFate fate = LineFate::Verbatim;
    std::string emitted_sentence;  // empty when skipped
    std::string emitted_code;      // label actually written (may be flipped)
    std::string true_code;
};

struct ScriptedRun {
    std::vector<ScriptedLine> lines;  // one record per ground-truth line
    std::string response_text;        // what the mock returns
};

/// Small grammar-style edit that keeps the sentence recognizably the same.
inline std::string rewrite_sentence(const std::string& s, Rng& rng) {
    static const std::vector<std::pair<std::string, std::string>> contractions = {
        {"can't", "cannot"},   {"Can't", "Cannot"},   {"won't", "will not"},
        {"Won't", "Will not"}, {"don't", "do not"},   {"Don't", "Do not"},
        {"I'm", "I am"},       {"it's", "it is"},     {"It's", "It is"},
        {"that's", "that is"}, {"That's", "That is"}, {"isn't", "is not"},
        {"we're", "we are"},   {"We're", "We are"},   {"let's", "let us"},
        {"Let's", "Let us"},   {"I'll", "I will"},    {"we'll", "we will"},
    };
    size_t offset = rng.bounded(contractions.size());
    for (size_t i = 0; i < contractions.size(); ++i) {
        const auto& [from, to] = contractions[(i + offset) % contractions.size()];
        size_t at = s.find(from);
        if (at != std::string::npos) {
            std::string out = s;
            out.replace(at, from.size(), to);
            return out;
        }
    }
    if (!s.empty() && s.back() == '.') {
        std::string out = s;
        if (rng.bounded(2)) {
            out.back() = '!';
        } else {
            out.pop_back();
        }
        return out;
    }
    size_t sp = s.find(' ');
    if (sp != std::string::npos) {
        std::string out = s;
        out.insert(sp, " ");  // doubled space, erased by normalization
        return out;
    }
    return s;
}

/// Deterministically derive one run's output from ground truth. The rolls for
/// skip, flip and rewrite are consumed for every line in a fixed order, so a
/// line's fate depends only on (seed, segment, run, line position).
inline ScriptedRun script_run(const SegmentGroundTruth& truth, const NoiseSpec& noise,
                              std::uint64_t seed, int run_index) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(truth.segment_index) + 1,
                     static_cast<std::uint64_t>(run_index) + 1));
    ScriptedRun out;
    for (size_t i = 0; i < truth.lines.size(); ++i) {
        const auto& line = truth.lines[i];
        double roll_skip = rng.next_double();
        double roll_flip = rng.next_double();
        double roll_rewrite = rng.next_double();

        ScriptedLine rec;
        rec.number = static_cast<int>(i) + 1;
        rec.true_code = line.code_label;
        rec.emitted_code = line.code_label;
        rec.emitted_sentence = line.sentence;

        bool flipped = false;
        if (roll_flip < noise.flip_fraction && !noise.flip_labels.empty()) {
            std::string other = noise.flip_labels[rng.bounded(noise.flip_labels.size())];
            if (other != line.code_label) {
                rec.emitted_code = other;
                flipped = true;
            }
        }
        bool rewritten = false;
        if (roll_rewrite < noise.rewrite_fraction) {
            std::string candidate = rewrite_sentence(line.sentence, rng);
            if (candidate != line.sentence &&
                text::similarity(candidate, line.sentence) >= noise.min_rewrite_similarity) {
                rec.emitted_sentence = candidate;
                rewritten = true;
            }
        }
        if (roll_skip < noise.skip_fraction) {
            rec.fate = LineFate::Skipped;
            rec.emitted_sentence.clear();
            rec.emitted_code.clear();
        } else {
            rec.fate = flipped ? (rewritten ? LineFate::RewrittenFlipped : LineFate::Flipped)
                               : (rewritten ? LineFate::Rewritten : LineFate::Verbatim);
            out.response_text +=
                std::to_string(rec.number) + " | " + rec.emitted_sentence + " | " + rec.emitted_code + "\n";
        }
        out.lines.push_back(std::move(rec));
    }
    return out;
}

struct MockEntry {
    std::optional<int> segment;
    std::optional<int> run;
    std::optional<std::string> prompt_hash;   // fnv1a64 hex of the full prompt
    std::vector<std::string> texts;           // chosen by (hash, run, seed) when several
    std::optional<std::string> fail;          // transport | auth | rate_limit | timeout
};

struct MockScript {
    enum class Kind { Static, Noisy };
    Kind kind = Kind::Static;
    std::vector<MockEntry> entries;
    std::optional<std::string> default_text;
    int jitter_ms = 0;  // bounded artificial delay, for concurrency tests

    NoiseSpec noise;
    std::vector<SegmentGroundTruth> segments;

    const SegmentGroundTruth* find_segment(int segment_index) const {
        for (const auto& s : segments) {
            if (s.segment_index == segment_index) return &s;
        }
        return nullptr;
    }
};

inline MockScript parse_mock_script(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("mock script: invalid JSON: ") + e.what());
    }
    MockScript s;
    std::string kind = j.value("kind", "static");
    if (kind == "static") {
        s.kind = MockScript::Kind::Static;
    } else if (kind == "noisy") {
        s.kind = MockScript::Kind::Noisy;
    } else {
        throw std::runtime_error("mock script: unknown kind '" + kind + "'");
    }
    if (j.contains("default_text")) s.default_text = j["default_text"].get<std::string>();
    s.jitter_ms = j.value("jitter_ms", 0);
    for (const auto& je : j.value("entries", nlohmann::json::array())) {
        MockEntry e;
        if (je.contains("segment")) e.segment = je["segment"].get<int>();
        if (je.contains("run")) e.run = je["run"].get<int>();
        if (je.contains("prompt_hash")) e.prompt_hash = je["prompt_hash"].get<std::string>();
        if (je.contains("text")) e.texts.push_back(je["text"].get<std::string>());
        if (je.contains("texts")) {
            for (const auto& t : je["texts"]) e.texts.push_back(t.get<std::string>());
        }
        if (je.contains("fail")) e.fail = je["fail"].get<std::string>();
        s.entries.push_back(std::move(e));
    }
    if (s.kind == MockScript::Kind::Noisy) {
        s.noise.skip_fraction = j.value("skip_fraction", 0.0);
        s.noise.rewrite_fraction = j.value("rewrite_fraction", 0.0);
        s.noise.flip_fraction = j.value("flip_fraction", 0.0);
        if (j.contains("flip_labels")) {
            s.noise.flip_labels = j["flip_labels"].get<std::vector<std::string>>();
        }
        s.noise.min_rewrite_similarity = j.value("min_rewrite_similarity", 0.85);
        for (const auto& js : j.at("segments")) {
            SegmentGroundTruth g;
            g.segment_index = js.at("segment").get<int>();
            for (const auto& jl : js.at("lines")) {
                g.lines.push_back({jl.value("speaker", ""), jl.at("sentence").get<std::string>(),
                                   jl.at("code").get<std::string>()});
            }
            s.segments.push_back(std::move(g));
        }
    }
    return s;
}

inline std::string serialize_mock_script(const MockScript& s) {
    nlohmann::json j;
    j["kind"] = s.kind == MockScript::Kind::Static ? "static" : "noisy";
    if (s.default_text) j["default_text"] = *s.default_text;
    if (s.jitter_ms) j["jitter_ms"] = s.jitter_ms;
    if (!s.entries.empty()) {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& e : s.entries) {
            nlohmann::json je;
            if (e.segment) je["segment"] = *e.segment;
            if (e.run) je["run"] = *e.run;
            if (e.prompt_hash) je["prompt_hash"] = *e.prompt_hash;
            if (e.texts.size() == 1) je["text"] = e.texts[0];
            if (e.texts.size() > 1) je["texts"] = e.texts;
            if (e.fail) je["fail"] = *e.fail;
            entries.push_back(je);
        }
        j["entries"] = entries;
    }
    if (s.kind == MockScript::Kind::Noisy) {
        j["skip_fraction"] = s.noise.skip_fraction;
        j["rewrite_fraction"] = s.noise.rewrite_fraction;
        j["flip_fraction"] = s.noise.flip_fraction;
        if (!s.noise.flip_labels.empty()) j["flip_labels"] = s.noise.flip_labels;
        j["min_rewrite_similarity"] = s.noise.min_rewrite_similarity;
        nlohmann::json segs = nlohmann::json::array();
        for (const auto& g : s.segments) {
            nlohmann::json js;
            js["segment"] = g.segment_index;
            nlohmann::json lines = nlohmann::json::array();
            for (const auto& l : g.lines) {
                lines.push_back({{"speaker", l.speaker}, {"sentence", l.sentence}, {"code", l.code_label}});
            }
            js["lines"] = lines;
            segs.push_back(js);
        }
        j["segments"] = segs;
    }
    return j.dump(2) + "\n";
}

/// Ground truth for a set of segments where unit_code_labels maps a unit's
/// transcript-wide index to its true code label.
inline std::vector<SegmentGroundTruth> ground_truth_from_segments(
    const std::vector<Segment>& segments, const std::map<int, std::string>& unit_code_labels) {
    std::vector<SegmentGroundTruth> out;
    for (const auto& seg : segments) {
        SegmentGroundTruth g;
        g.segment_index = seg.segment_index;
        for (const auto& u : seg.sentences) {
            auto it = unit_code_labels.find(u.sentence_index);
            if (it == unit_code_labels.end()) {
                throw std::invalid_argument("ground truth: no code for unit " +
                                            std::to_string(u.sentence_index));
            }
            g.lines.push_back({u.speaker, u.text, it->second});
        }
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace convcode
