// Copyright 2026 The convcode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "convcode/evaluation.hpp"
#include "convcode/runner.hpp"
#include "convcode/scheme.hpp"

namespace convcode {

/// Exact binomial coefficient C(n, k). Throws on k > n and on results that
/// do not fit in 64 bits.
inline unsigned long long combination_count(unsigned long long n, unsigned long long k) {
    if (k > n) throw std::invalid_argument("combination_count: k > n");
    if (k > n - k) k = n - k;
    unsigned long long result = 1;
    for (unsigned long long i = 1; i <= k; ++i) {
        // result * (n - k + i) / i equals C(n - k + i, i), an integer.
        unsigned __int128 tmp = static_cast<unsigned __int128>(result) * (n - k + i);
        tmp /= i;
        if (tmp > UINT64_MAX) throw std::overflow_error("combination_count: result exceeds 64 bits");
        result = static_cast<unsigned long long>(tmp);
    }
    return result;
}

/// Human-coded transcripts to draw exemplar sets from, with per-transcript
/// code coverage derived from the annotations.
struct TranscriptPool {
    std::vector<CodedTranscript> transcripts;
    std::vector<std::vector<bool>> coverage;  // [transcript][scheme code position]

    static TranscriptPool build(std::vector<CodedTranscript> transcripts, const CodingScheme& scheme) {
        TranscriptPool pool;
        pool.transcripts = std::move(transcripts);
        std::set<std::string> ids;
        for (const auto& ct : pool.transcripts) {
            if (!ids.insert(ct.transcript.transcript_id).second) {
                throw std::runtime_error("pool: duplicate transcript id '" +
                                         ct.transcript.transcript_id + "'");
            }
        }
        for (const auto& ct : pool.transcripts) {
            std::vector<bool> bits(scheme.codes.size(), false);
            for (const auto& a : ct.annotations) {
                bool known = false;
                for (size_t i = 0; i < scheme.codes.size(); ++i) {
                    if (scheme.codes[i].code_id == a.code_id) {
                        bits[i] = true;
                        known = true;
                        break;
                    }
                }
                if (!known) {
                    throw std::runtime_error("pool: transcript '" + ct.transcript.transcript_id +
                                             "' uses unknown code '" + a.code_id + "'");
                }
            }
            pool.coverage.push_back(std::move(bits));
        }
        return pool;
    }

    const CodedTranscript* find(const std::string& transcript_id) const {
        for (const auto& ct : transcripts) {
            if (ct.transcript.transcript_id == transcript_id) return &ct;
        }
        return nullptr;
    }
};

struct CandidateSet {
    std::vector<std::string> members;      // transcript ids, sorted
    std::vector<size_t> member_positions;  // into the pool
    std::set<std::string> covered_codes;

    // Filled by select_best.
    std::optional<double> strict;
    std::optional<double> lenient;
    std::optional<double> kappa;
    bool disqualified = false;
    std::string failure_note;

    std::string joined_members() const {
        std::string out;
        for (const auto& m : members) {
            if (!out.empty()) out += "+";
            out += m;
        }
        return out;
    }
};

/// Rejection-sample n_candidates distinct k-subsets of the pool, each
/// covering every scheme code at least once. Fails early, naming codes no
/// pool transcript covers; fails after max_attempts draws otherwise.
inline std::vector<CandidateSet> sample_covering_sets(const TranscriptPool& pool,
                                                      const CodingScheme& scheme, size_t k = 5,
                                                      size_t n_candidates = 5, std::uint64_t seed = 0,
                                                      size_t max_attempts = 100000) {
    if (k == 0 || k > pool.transcripts.size()) {
        throw std::invalid_argument("sample_covering_sets: need 1 <= k <= pool size, got k=" +
                                    std::to_string(k) + " over " +
                                    std::to_string(pool.transcripts.size()) + " transcripts");
    }
    std::vector<std::string> uncovered;
    for (size_t c = 0; c < scheme.codes.size(); ++c) {
        bool any = false;
        for (const auto& bits : pool.coverage) any = any || bits[c];
        if (!any) uncovered.push_back(scheme.codes[c].code_id);
    }
    if (!uncovered.empty()) {
        std::string msg = "sample_covering_sets: no pool transcript covers:";
        for (const auto& c : uncovered) msg += " " + c;
        throw std::runtime_error(msg);
    }

    Rng rng(seed);
    std::set<std::vector<size_t>> seen;
    std::vector<CandidateSet> out;
    size_t attempts = 0;
    while (out.size() < n_candidates) {
        if (++attempts > max_attempts) {
            throw std::runtime_error("sample_covering_sets: gave up after " +
                                     std::to_string(max_attempts) + " draws with " +
                                     std::to_string(out.size()) + " of " +
                                     std::to_string(n_candidates) + " candidates found");
        }
        auto picked = rng.sample_indices(pool.transcripts.size(), k);
        std::sort(picked.begin(), picked.end());
        if (seen.count(picked)) continue;
        std::vector<bool> covered(scheme.codes.size(), false);
        for (size_t idx : picked) {
            for (size_t c = 0; c < covered.size(); ++c) {
                if (pool.coverage[idx][c]) covered[c] = true;
            }
        }
        bool all = true;
        for (bool b : covered) all = all && b;
        if (!all) continue;
        seen.insert(picked);
        CandidateSet cand;
        cand.member_positions = picked;
        for (size_t idx : picked) cand.members.push_back(pool.transcripts[idx].transcript.transcript_id);
        std::sort(cand.members.begin(), cand.members.end());
        for (size_t c = 0; c < covered.size(); ++c) {
            if (covered[c]) cand.covered_codes.insert(scheme.codes[c].code_id);
        }
        out.push_back(std::move(cand));
    }
    return out;
}

struct SelectionResult {
    CandidateSet winner;
    std::vector<CandidateSet> leaderboard;  // best first, disqualified last
};

namespace detail {

// Higher lenient, then strict, then kappa; lexicographic members as the
// deterministic final tie-break. Disqualified candidates sort last.
inline bool candidate_better(const CandidateSet& a, const CandidateSet& b) {
    if (a.disqualified != b.disqualified) return !a.disqualified;
    if (a.disqualified) return a.joined_members() < b.joined_members();
    if (*a.lenient != *b.lenient) return *a.lenient > *b.lenient;
    if (*a.strict != *b.strict) return *a.strict > *b.strict;
    if (*a.kappa != *b.kappa) return *a.kappa > *b.kappa;
    return a.joined_members() < b.joined_members();
}

}  // namespace detail

/// Empirically pick the exemplar set: run the full coding pipeline per
/// candidate over human-coded validation transcripts, pool the match report,
/// and keep the candidate with the best lenient match. A candidate whose run
/// fails (any failed segment, or a pipeline error) is disqualified rather
/// than fatal.
inline SelectionResult select_best(std::vector<CandidateSet> candidates, const TranscriptPool& pool,
                                   const std::vector<CodedTranscript>& validation,
                                   const CodingScheme& scheme, const BackendConfig& backend_cfg,
                                   const RunnerConfig& rc) {
    if (candidates.empty()) throw std::invalid_argument("select_best: no candidates");
    if (validation.empty()) throw std::invalid_argument("select_best: no validation transcripts");
    for (const auto& v : validation) {
        if (v.annotations.empty()) {
            throw std::runtime_error("select_best: validation transcript '" +
                                     v.transcript.transcript_id + "' has no human codes");
        }
    }

    for (auto& cand : candidates) {
        try {
            std::vector<CodedTranscript> members;
            for (size_t pos : cand.member_positions) members.push_back(pool.transcripts[pos]);
            auto exemplars = ExemplarSet::from_coded(std::move(members), scheme);

            std::vector<CodedResult> results;
            results.reserve(validation.size());
            bool failed_segment = false;
            for (const auto& v : validation) {
                auto r = code_transcript(v.transcript, scheme, exemplars, backend_cfg, rc);
                failed_segment = failed_segment || r.any_segment_failed();
                results.push_back(std::move(r));
            }
            if (failed_segment) {
                cand.disqualified = true;
                cand.failure_note = "segment failure during validation coding";
                continue;
            }
            std::vector<std::pair<const CodedResult*, const std::vector<CodedUnit>*>> pairs;
            for (size_t i = 0; i < validation.size(); ++i) {
                pairs.emplace_back(&results[i], &validation[i].annotations);
            }
            auto report = compare_pooled(pairs, scheme);
            cand.strict = report.strict_match_rate;
            cand.lenient = report.lenient_match_rate;
            cand.kappa = report.kappa.value;
        } catch (const std::exception& e) {
            cand.disqualified = true;
            cand.failure_note = e.what();
        }
    }

    std::sort(candidates.begin(), candidates.end(), detail::candidate_better);
    if (candidates.front().disqualified) {
        throw std::runtime_error("select_best: every candidate was disqualified");
    }
    return {candidates.front(), candidates};
}

inline std::string leaderboard_csv(const std::vector<CandidateSet>& leaderboard) {
    std::string out = "candidate_members,strict,lenient,kappa,disqualified\n";
    char buf[64];
    auto fmt = [&buf](std::optional<double> v) -> std::string {
        if (!v) return "";
        std::snprintf(buf, sizeof(buf), "%.6f", *v);
        return buf;
    };
    for (const auto& c : leaderboard) {
        out += csv::format_row({c.joined_members(), fmt(c.strict), fmt(c.lenient), fmt(c.kappa),
                                c.disqualified ? "yes" : "no"});
    }
    return out;
}

}  // namespace convcode
