// Copyright 2026 The convcode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "convcode/scheme.hpp"
#include "convcode/transcript.hpp"

namespace convcode {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

/// Transcript id from a filename: the part before the first dot.
inline std::string transcript_id_from_path(const fs::path& path) {
    std::string name = path.filename().string();
    auto dot = name.find('.');
    return dot == std::string::npos ? name : name.substr(0, dot);
}

inline TranscriptFormat transcript_format_for_path(const fs::path& path) {
    return path.extension() == ".csv" ? TranscriptFormat::TurnCsv : TranscriptFormat::LabeledLines;
}

inline Transcript load_transcript_file(const fs::path& path) {
    return parse_transcript(read_file(path), transcript_format_for_path(path),
                            transcript_id_from_path(path));
}

/// Accepts a builtin scheme name or a path to a scheme file.
inline CodingScheme resolve_scheme(const std::string& name_or_path,
                                   std::vector<std::string>* warnings = nullptr) {
    if (auto builtin = builtin_scheme(name_or_path)) return *builtin;
    if (!fs::exists(name_or_path)) {
        throw std::runtime_error("scheme '" + name_or_path + "' is neither a builtin name nor a file");
    }
    return load_scheme(read_file(name_or_path), warnings);
}

/// Load an exemplar directory.
///
/// Layout: each coded transcript is a pair `<id>.txt` (labeled lines) or
/// `<id>.csv` (turn-csv) plus `<id>.codes.csv` (annotation CSV). A directory
/// containing `ideal_sentences.json` ({code_id: [sentence, ...]}) is an
/// ideal-sentences set instead. Supplements always come from the scheme file.
inline ExemplarSet load_exemplar_dir(const fs::path& dir, const CodingScheme& scheme) {
    if (!fs::is_directory(dir)) throw std::runtime_error("exemplars: not a directory: " + dir.string());

    fs::path ideal = dir / "ideal_sentences.json";
    if (fs::exists(ideal)) {
        ExemplarSet e;
        e.mode = ExemplarMode::IdealSentences;
        nlohmann::json j = nlohmann::json::parse(read_file(ideal));
        for (auto& [code_id, sentences] : j.items()) {
            if (!scheme.find(code_id)) {
                throw std::runtime_error("exemplars: ideal sentences for unknown code '" + code_id + "'");
            }
            e.ideal_sentences[code_id] = sentences.get<std::vector<std::string>>();
        }
        e.supplements = scheme.supplements;
        return e;
    }

    std::vector<fs::path> entries;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file()) entries.push_back(entry.path());
    }
    std::sort(entries.begin(), entries.end());

    std::vector<CodedTranscript> coded;
    for (const auto& p : entries) {
        std::string name = p.filename().string();
        if (name.size() > 10 && name.ends_with(".codes.csv")) continue;
        if (p.extension() != ".txt" && p.extension() != ".csv") continue;
        fs::path codes = p;
        codes.replace_extension();
        codes += ".codes.csv";
        if (!fs::exists(codes)) {
            throw std::runtime_error("exemplars: transcript '" + name + "' has no matching " +
                                     codes.filename().string());
        }
        CodedTranscript ct;
        ct.transcript = load_transcript_file(p);
        ct.annotations = load_annotations(read_file(codes), &scheme);
        for (const auto& a : ct.annotations) {
            if (a.transcript_id != ct.transcript.transcript_id) {
                throw std::runtime_error("exemplars: annotation transcript_id '" + a.transcript_id +
                                         "' does not match transcript '" +
                                         ct.transcript.transcript_id + "'");
            }
        }
        coded.push_back(std::move(ct));
    }
    if (coded.empty()) {
        throw std::runtime_error("exemplars: no transcript/codes pairs found in " + dir.string());
    }
    return ExemplarSet::from_coded(std::move(coded), scheme);
}

}  // namespace convcode
