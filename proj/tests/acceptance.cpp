// Copyright 2026 The convcode Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: every release-gating behavior, one PASS/FAIL line each,
// all offline against the mock backend.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "convcode/evaluation.hpp"
#include "convcode/io.hpp"
#include "convcode/prompt.hpp"
#include "convcode/runner.hpp"
#include "convcode/selection.hpp"
#include "support/oracles.hpp"

using namespace convcode;
namespace fs = std::filesystem;

namespace {

const fs::path kSourceDir = CONVCODE_SOURCE_DIR;

struct Check {
    bool ok = true;
    std::ostringstream detail;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            if (detail.tellp() > 0) detail << "; ";
            detail << what;
        }
    }
};

fs::path work_dir() {
    auto dir = fs::temp_directory_path() / "convcode_acceptance";
    fs::create_directories(dir);
    return dir;
}

int run_tool(const std::string& args) {
    auto dir = work_dir();
    std::string cmd = std::string(CONVCODE_BIN) + " " + args + " > " + (dir / "stdout.txt").string() +
                      " 2> " + (dir / "stderr.txt").string();
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// --------------------------------------------------------------------------
// 1. Five-run consistency voting, exhaustively enumerated.
// --------------------------------------------------------------------------
Check consistency_voting_exhaustive() {
    Check c;
    auto start = std::chrono::steady_clock::now();
    const std::vector<std::optional<std::string>> alphabet = {"A", "B", "C", "D", std::nullopt};
    long long n = 0;
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b)
            for (int d = 0; d < 5; ++d)
                for (int e = 0; e < 5; ++e)
                    for (int f = 0; f < 5; ++f) {
                        std::vector<std::optional<std::string>> votes = {
                            alphabet[a], alphabet[b], alphabet[d], alphabet[e], alphabet[f]};
                        std::map<std::string, int> tally;
                        for (const auto& v : votes) {
                            if (v) ++tally[*v];
                        }
                        int top = 0, qualifying = 0;
                        std::string top_code;
                        for (const auto& [code, count] : tally) {
                            if (count > top) {
                                top = count;
                                top_code = code;
                            }
                            if (count >= 3) ++qualifying;
                        }
                        c.expect(qualifying <= 1, "two codes qualified at threshold 3");
                        auto v = vote(votes, 5, 3);
                        ConsistencyLabel expected;
                        if (top < 3) {
                            expected = ConsistencyLabel::Unreported;
                        } else if (top == 3) {
                            expected = ConsistencyLabel::Moderate;
                        } else if (top == 4) {
                            expected = ConsistencyLabel::High;
                        } else {
                            expected = ConsistencyLabel::Perfect;
                        }
                        c.expect(v.label == expected, "label mismatch");
                        if (top < 3) {
                            c.expect(!v.assigned.has_value(), "assigned code below threshold");
                        } else {
                            c.expect(v.assigned.has_value() && *v.assigned == top_code,
                                     "assigned code wrong");
                        }
                        ++n;
                    }
    c.expect(n == 3125, "enumeration incomplete");
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                    start)
                  .count();
    c.expect(ms < 1000, "took " + std::to_string(ms) + " ms (budget 1000)");
    return c;
}

// --------------------------------------------------------------------------
// 2. True-accuracy estimate.
// --------------------------------------------------------------------------
Check true_accuracy_estimate() {
    Check c;
    double v = estimate_true_accuracy(0.73, 0.68);
    c.expect(std::abs(v - 0.9136) < 5e-5, "0.73/0.68 gave " + std::to_string(v));
    c.expect(static_cast<int>(std::lround(v * 100)) == 91, "does not round to 91%");
    return c;
}

// --------------------------------------------------------------------------
// 3. Exact combination counts.
// --------------------------------------------------------------------------
Check combination_counts() {
    Check c;
    c.expect(combination_count(75, 5) == 17259390ULL, "C(75,5) wrong");
    c.expect(combination_count(70, 5) == 12103014ULL, "C(70,5) wrong");
    return c;
}

// --------------------------------------------------------------------------
// 4. Context-length registry and token estimator.
// --------------------------------------------------------------------------
Check token_registry() {
    Check c;
    struct Row {
        const char* name;
        long long tokens;
        long long words;
    };
    const std::vector<Row> expected = {
        {"BERT", 512, 400},           {"GPT4", 128000, 96000},    {"Claude 1", 100000, 75000},
        {"Claude 2", 200000, 150000}, {"Claude 3", 1000000, 750000},
    };
    const auto& ps = builtin_profiles();
    c.expect(ps.size() == expected.size(), "profile count");
    for (size_t i = 0; i < expected.size() && i < ps.size(); ++i) {
        c.expect(ps[i].model_name == expected[i].name, std::string("name ") + expected[i].name);
        c.expect(ps[i].context_length_tokens == expected[i].tokens,
                 std::string(expected[i].name) + " tokens");
        c.expect(ps[i].approx_word_capacity == expected[i].words,
                 std::string(expected[i].name) + " words");
    }
    std::string words;
    words.reserve(75000 * 2);
    for (int i = 0; i < 75000; ++i) words += "w ";
    c.expect(estimate_tokens(words) == 100000, "75,000 words did not estimate to 100,000 tokens");
    return c;
}

// --------------------------------------------------------------------------
// 5. Built-in 19-code scheme, golden file included.
// --------------------------------------------------------------------------
Check builtin_scheme_golden() {
    Check c;
    auto s = builtin_jackel19();
    const std::vector<std::string> labels = {
        "Providing positional information",
        "Asking positional information",
        "Providing priority-related information",
        "Asking for priority-related information",
        "Providing preference-related information",
        "Asking for preference-related information",
        "Clarification",
        "Single-issue activity",
        "Multi-issue activity",
        "Rejecting Offer",
        "Accepting Offer",
        "Contentious Communication",
        "Substantiation",
        "Positive Statements",
        "Negative Statements",
        "Humor",
        "Active listening",
        "Procedural comments",
        "Other",
    };
    c.expect(s.codes.size() == 19, "code count");
    for (size_t i = 0; i < labels.size() && i < s.codes.size(); ++i) {
        c.expect(s.codes[i].label == labels[i], "label order at " + std::to_string(i));
    }
    const std::vector<std::pair<std::string, std::string>> samples = {
        {"Asking positional information", "What is the maximum price you can pay for these materials?"},
        {"Providing priority-related information",
         "We prioritize growth and expansion over maintaining a conservative business model."},
        {"Single-issue activity", "Would you accept a payment of $5000 now and $5000 upon completion?"},
        {"Substantiation", "We can't afford to overlook the potential consequences of this decision."},
        {"Rejecting Offer", "I'm sorry, but this just isn't going to work for us."},
        {"Accepting Offer", "That’s very generous of you. I accept."},
    };
    for (const auto& [label, sentence] : samples) {
        bool found = false;
        for (const auto& code : s.codes) {
            if (code.label != label) continue;
            for (const auto& e : code.example_sentences) found = found || e.sentence == sentence;
        }
        c.expect(found, "sample sentence missing for " + label);
    }
    auto golden_path = kSourceDir / "schemes" / "jackel19.json";
    std::string golden = read_file(golden_path);
    c.expect(serialize_scheme(s) == golden, "golden file drifted");
    c.expect(load_scheme(golden) == s, "golden file does not load back to the builtin");
    return c;
}

// --------------------------------------------------------------------------
// 6. End-to-end CLI determinism on a 250-sentence fixture.
// --------------------------------------------------------------------------
Check end_to_end_determinism() {
    Check c;
    auto dir = work_dir() / "e2e";
    fs::remove_all(dir);
    fs::create_directories(dir);

    Transcript t;
    t.transcript_id = "fixture250";
    auto scheme = builtin_jackel19();
    for (int i = 0; i < 50; ++i) {
        std::string body;
        for (int s = 0; s < 5; ++s) {
            body += "Turn " + std::to_string(i) + " makes point " + std::to_string(s) + " plainly. ";
        }
        t.turns.push_back({i, i % 2 ? "Seller" : "Buyer", text::trim(body)});
    }
    resplit_sentences(t);
    c.expect(t.sentences.size() == 250, "fixture is not 250 sentences");
    write_file(dir / "fixture250.csv", serialize_transcript(t, TranscriptFormat::TurnCsv));

    std::map<int, std::string> labels;
    for (const auto& u : t.sentences) {
        labels[u.sentence_index] =
            scheme.codes[static_cast<size_t>(u.sentence_index) % scheme.codes.size()].label;
    }
    MockScript script;
    script.kind = MockScript::Kind::Noisy;  // zero noise
    script.segments = ground_truth_from_segments(segment_transcript(t, 100), labels);
    write_file(dir / "clean.json", serialize_mock_script(script));

    auto start = std::chrono::steady_clock::now();
    std::string base = "code --scheme jackel19 --transcript " + (dir / "fixture250.csv").string() +
                       " --backend mock --mock-script " + (dir / "clean.json").string() + " --seed 42";
    int rc1 = run_tool(base + " --out " + (dir / "out1").string());
    int rc2 = run_tool(base + " --out " + (dir / "out2").string());
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                    start)
                  .count();
    c.expect(rc1 == 0 && rc2 == 0, "tool exited nonzero");
    c.expect(ms < 10000, "two runs took " + std::to_string(ms) + " ms (budget 10000)");
    if (!c.ok) return c;

    std::string csv1 = read_file(dir / "out1/coded.csv");
    std::string csv2 = read_file(dir / "out2/coded.csv");
    c.expect(csv1 == csv2, "coded.csv differs between runs");

    auto rows = csv::parse(csv1);
    c.expect(rows.size() == 251, "expected 250 output rows, got " + std::to_string(rows.size() - 1));
    for (size_t i = 1; i < rows.size(); ++i) {
        c.expect(rows[i][0] == std::to_string(i - 1), "row order broken at " + std::to_string(i));
        c.expect(rows[i][5] == "Perfect", "non-Perfect row " + std::to_string(i));
        if (!c.ok) break;
    }
    auto report = parse_coded_report(read_file(dir / "out1/report.json"));
    c.expect(report.segments.size() == 3, "expected 3 segments, got " +
                                              std::to_string(report.segments.size()));
    return c;
}

// --------------------------------------------------------------------------
// 7. Noisy-mock recovery, verified against the script generator's oracle.
// --------------------------------------------------------------------------
Check noisy_recovery() {
    Check c;
    auto dir = work_dir() / "noisy";
    fs::remove_all(dir);
    fs::create_directories(dir);

    auto scheme = builtin_jackel19();
    Transcript t;
    t.transcript_id = "noisy";
    for (int i = 0; i < 60; ++i) {
        std::string body = "Turn " + std::to_string(i) + " states its case clearly. ";
        body += "We can't concede point " + std::to_string(i) + " without a trade. ";
        body += "That's how it is.";
        t.turns.push_back({i, i % 2 ? "Seller" : "Buyer", body});
    }
    resplit_sentences(t);  // 180 sentences over 2 segments

    std::map<int, std::string> labels;
    for (const auto& u : t.sentences) {
        labels[u.sentence_index] =
            scheme.codes[static_cast<size_t>(u.sentence_index) % scheme.codes.size()].label;
    }
    MockScript script;
    script.kind = MockScript::Kind::Noisy;
    script.segments = ground_truth_from_segments(segment_transcript(t, 100), labels);
    script.noise.skip_fraction = 0.05;
    script.noise.rewrite_fraction = 0.10;
    script.noise.flip_fraction = 0.0;
    write_file(dir / "noisy.json", serialize_mock_script(script));

    const std::uint64_t seed = 42;
    BackendConfig cfg;
    cfg.kind = BackendKind::Mock;
    cfg.mock_script_path = (dir / "noisy.json").string();
    cfg.mock_seed = seed;
    RunnerConfig rc;
    rc.allow_sparse = true;
    rc.seed = seed;
    auto result = code_transcript(t, scheme, ExemplarSet::from_ideal(scheme), cfg, rc);
    c.expect(result.rows.size() == t.sentences.size(), "row count");

    long long rewritten_total = 0, rewritten_correct = 0;
    for (const auto& truth : script.segments) {
        std::vector<int> true_votes(truth.lines.size(), 0);
        int first_unit = result.segments[static_cast<size_t>(truth.segment_index)].first_unit_index;
        for (int run = 0; run < rc.runs; ++run) {
            auto expected = script_run(truth, script.noise, seed, run);
            for (size_t li = 0; li < expected.lines.size(); ++li) {
                const auto& exp = expected.lines[li];
                const auto& row = result.rows[static_cast<size_t>(first_unit) + li];
                const auto& got = row.votes[static_cast<size_t>(run)];
                if (exp.fate == LineFate::Skipped) {
                    c.expect(!got.has_value(), "skipped line produced a vote");
                    continue;
                }
                if (exp.emitted_code == exp.true_code) ++true_votes[li];
                bool rewritten = exp.fate == LineFate::Rewritten;
                if (rewritten) {
                    ++rewritten_total;
                    if (got.has_value() && scheme.find(*got)->label == exp.emitted_code) {
                        ++rewritten_correct;
                    }
                }
            }
        }
        for (size_t li = 0; li < truth.lines.size(); ++li) {
            if (true_votes[li] < rc.vote_threshold) continue;
            const auto& row = result.rows[static_cast<size_t>(first_unit) + li];
            bool match = row.assigned.has_value() &&
                         scheme.find(*row.assigned)->label == truth.lines[li].code_label;
            c.expect(match, "vote missed ground truth at unit " + std::to_string(row.unit_index));
        }
    }
    c.expect(rewritten_total >= 50, "too few rewrites exercised: " + std::to_string(rewritten_total));
    double bound_rate =
        rewritten_total ? static_cast<double>(rewritten_correct) / static_cast<double>(rewritten_total)
                        : 0.0;
    c.expect(bound_rate >= 0.99, "rewritten-line binding rate " + std::to_string(bound_rate));
    return c;
}

// --------------------------------------------------------------------------
// 8. Metrics against an independent brute-force implementation.
// --------------------------------------------------------------------------
Check metrics_oracle_equivalence() {
    Check c;
    Rng rng(777);
    for (int it = 0; it < 200 && c.ok; ++it) {
        size_t n_codes = 2 + rng.bounded(5);
        CodingScheme scheme;
        scheme.scheme_id = "acc";
        scheme.name = "acceptance";
        for (size_t i = 0; i < n_codes; ++i) {
            std::string id(1, static_cast<char>('a' + i));
            scheme.codes.push_back({id, "Code " + id, "Def " + id, "", {}});
        }
        size_t n_units = 1 + rng.bounded(30);
        CodedResult model;
        model.transcript_id = "t";
        model.scheme_id = "acc";
        std::vector<CodedUnit> human;
        std::vector<std::pair<std::string, std::string>> pairs;
        long long matches = 0;
        for (size_t i = 0; i < n_units; ++i) {
            std::string h(1, static_cast<char>('a' + rng.bounded(n_codes)));
            human.push_back({"t", static_cast<int>(i), h, "human"});
            RunVotes row;
            row.unit_index = static_cast<int>(i);
            if (rng.bounded(8) != 0) {
                std::string m(1, static_cast<char>('a' + rng.bounded(n_codes)));
                row.assigned = m;
                row.consistency = ConsistencyLabel::Perfect;
                pairs.emplace_back(h, m);
                if (h == m) ++matches;
            }
            for (int r = 0; r < 5; ++r) row.votes.push_back(row.assigned);
            model.rows.push_back(std::move(row));
        }
        auto report = compare(model, human, scheme);
        double strict = static_cast<double>(matches) / static_cast<double>(n_units);
        c.expect(std::abs(report.strict_match_rate - strict) < 1e-12, "strict rate");
        if (pairs.empty()) continue;
        double lenient = static_cast<double>(matches) / static_cast<double>(pairs.size());
        c.expect(std::abs(report.lenient_match_rate - lenient) < 1e-12, "lenient rate");
        auto stats = oracle::agreement(pairs);
        if (!report.kappa.degenerate) {
            c.expect(std::abs(report.kappa.value - stats.kappa) < 1e-12, "kappa");
        }
        std::map<std::string, long long> h_marg, m_marg;
        for (const auto& [h, m] : pairs) {
            ++h_marg[h];
            ++m_marg[m];
        }
        for (size_t h = 0; h < report.confusion.codes.size(); ++h) {
            long long row_sum = 0, col_sum = 0;
            for (size_t m = 0; m < report.confusion.codes.size(); ++m) {
                row_sum += report.confusion.at(h, m);
                col_sum += report.confusion.at(m, h);
                long long expected = 0;
                auto hit = stats.confusion.find(report.confusion.codes[h]);
                if (hit != stats.confusion.end()) {
                    auto mit = hit->second.find(report.confusion.codes[m]);
                    if (mit != hit->second.end()) expected = mit->second;
                }
                c.expect(report.confusion.at(h, m) == expected, "confusion cell");
            }
            c.expect(row_sum == h_marg[report.confusion.codes[h]], "row marginal");
            c.expect(col_sum == m_marg[report.confusion.codes[h]], "column marginal");
        }
    }
    return c;
}

// --------------------------------------------------------------------------
// 9. Blinded export: balanced option order, no provenance in the bytes.
// --------------------------------------------------------------------------
Check blinded_export() {
    Check c;
    CodingScheme scheme;
    scheme.scheme_id = "blind";
    scheme.name = "blind";
    scheme.codes.push_back({"offer_talk", "Offer talk", "Discussing offers.", "", {}});
    scheme.codes.push_back({"info_talk", "Info talk", "Sharing facts.", "", {}});
    scheme.codes.push_back({"other_talk", "Other talk", "Anything else.", "", {}});

    Transcript t;
    t.transcript_id = "b";
    for (int i = 0; i < 12; ++i) {
        t.turns.push_back({i, i % 2 ? "Seller" : "Buyer",
                           "Exchange " + std::to_string(i) + " proceeds without incident."});
    }
    CodedResult result;
    result.transcript_id = "b";
    result.scheme_id = "blind";
    std::vector<CodedUnit> human;
    for (int i = 0; i < 12; ++i) {
        RunVotes row;
        row.unit_index = i;
        row.turn_index = i;
        row.speaker = i % 2 ? "Seller" : "Buyer";
        row.text = "Exchange " + std::to_string(i) + " proceeds without incident.";
        row.assigned = i < 10 ? "offer_talk" : "other_talk";
        row.consistency = ConsistencyLabel::Perfect;
        for (int r = 0; r < 5; ++r) row.votes.push_back(row.assigned);
        result.rows.push_back(std::move(row));
        human.push_back({"b", i, i < 10 ? "info_talk" : "other_talk", "h"});
    }
    // Exactly 10 mismatches (units 0..9).

    long long model_first = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        auto e = sample_mismatches(result, human, t, scheme, 10, seed);
        c.expect(e.samples.size() == 10, "sample count");
        std::string bytes = text::to_lower(mismatch_export_csv(e));
        c.expect(bytes.find("model") == std::string::npos, "export leaks 'model'");
        c.expect(bytes.find("human") == std::string::npos, "export leaks 'human'");
        c.expect(bytes.find("coder") == std::string::npos, "export leaks 'coder'");
        for (const auto& k : e.key) {
            model_first += k.model_option == 1 ? 1 : 0;
            ++total;
        }
        if (!c.ok) break;
    }
    double share = static_cast<double>(model_first) / static_cast<double>(total);
    c.expect(share >= 0.45 && share <= 0.55,
             "option_1 model share " + std::to_string(share) + " outside [0.45, 0.55]");
    return c;
}

// --------------------------------------------------------------------------
// 10. Covering-set sampling: forced membership and seed determinism.
// --------------------------------------------------------------------------
Check covering_sets() {
    Check c;
    CodingScheme scheme;
    scheme.scheme_id = "cover";
    scheme.name = "cover";
    for (const char* id : {"ask", "offer", "accept", "rare"}) {
        scheme.codes.push_back({id, std::string("L ") + id, std::string("D ") + id, "", {}});
    }
    std::vector<CodedTranscript> transcripts;
    auto make = [&](const std::string& id, const std::vector<std::string>& codes) {
        CodedTranscript ct;
        ct.transcript.transcript_id = id;
        std::string body;
        for (size_t i = 0; i < codes.size(); ++i) {
            body += "Unit " + std::to_string(i) + " of " + id + " speaks. ";
            ct.annotations.push_back({id, static_cast<int>(i), codes[i], "human"});
        }
        ct.transcript.turns.push_back({0, "A", text::trim(body)});
        resplit_sentences(ct.transcript);
        return ct;
    };
    transcripts.push_back(make("rare_holder", {"ask", "offer", "accept", "rare"}));
    for (int i = 0; i < 7; ++i) {
        transcripts.push_back(make("t" + std::to_string(i), {"ask", "offer", "accept"}));
    }
    auto pool = TranscriptPool::build(transcripts, scheme);

    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto candidates = sample_covering_sets(pool, scheme, 4, 5, seed);
        c.expect(candidates.size() == 5, "candidate count");
        for (const auto& cand : candidates) {
            bool has = std::find(cand.members.begin(), cand.members.end(), "rare_holder") !=
                       cand.members.end();
            c.expect(has, "candidate missing the unique coverer (seed " + std::to_string(seed) + ")");
            std::set<std::string> covered;
            for (size_t pos : cand.member_positions) {
                for (const auto& a : pool.transcripts[pos].annotations) covered.insert(a.code_id);
            }
            c.expect(covered.size() == scheme.codes.size(), "coverage by annotations");
        }
        if (!c.ok) break;
    }
    auto a = sample_covering_sets(pool, scheme, 4, 5, 123);
    auto b = sample_covering_sets(pool, scheme, 4, 5, 123);
    for (size_t i = 0; i < a.size(); ++i) {
        c.expect(a[i].members == b[i].members, "same-seed candidate lists differ");
    }
    return c;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Check()> run;
    };
    const std::vector<Criterion> criteria = {
        {"consistency voting reproduces the 5-run label table exhaustively", consistency_voting_exhaustive},
        {"true-accuracy estimate: (0.73, 0.68) -> 0.9136, i.e. 91%", true_accuracy_estimate},
        {"combination counts: C(75,5) = 17,259,390 and C(70,5) = 12,103,014", combination_counts},
        {"context-length registry rows and token estimator are exact", token_registry},
        {"builtin jackel19 labels, sample sentences and golden file", builtin_scheme_golden},
        {"end-to-end determinism: 250 sentences, 3 segments, byte-identical", end_to_end_determinism},
        {"noisy-mock recovery: >=99% rewrite binding, votes match ground truth", noisy_recovery},
        {"match metrics equal the brute-force oracle to 1e-12", metrics_oracle_equivalence},
        {"blinded export: balanced options over 1,000 seeds, no provenance bytes", blinded_export},
        {"covering-set sampling: forced membership and seed determinism", covering_sets},
    };

    int failures = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        Check c;
        try {
            c = criteria[i].run();
        } catch (const std::exception& e) {
            c.ok = false;
            c.detail << "exception: " << e.what();
        }
        std::printf("%s  %2zu. %s%s%s\n", c.ok ? "PASS" : "FAIL", i + 1, criteria[i].name,
                    c.ok ? "" : " -- ", c.ok ? "" : c.detail.str().c_str());
        if (!c.ok) ++failures;
    }
    if (failures) {
        std::printf("%d of %zu acceptance criteria failed\n", failures, criteria.size());
        return 1;
    }
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
    return 0;
}
