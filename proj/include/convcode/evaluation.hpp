// Copyright 2026 The convcode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "convcode/csv.hpp"
#include "convcode/rng.hpp"
#include "convcode/runner.hpp"
#include "convcode/scheme.hpp"
#include "convcode/transcript.hpp"

namespace convcode {

// Model output is validated as a "match" against human coding, not as ground
// truth: human coders drift and disagree too, which is what the mismatch
// adjudication workflow below is for.

struct ConfusionMatrix {
    std::vector<std::string> codes;               // axis order; human = rows, model = columns
    std::vector<std::vector<long long>> counts;
    long long total = 0;

    long long at(size_t human, size_t model) const { return counts[human][model]; }
};

struct KappaResult {
    double value = 0.0;
    bool degenerate = false;  // p_e == 1: marginals leave no room for chance correction
};

/// Cohen's kappa over (human, model) code pairs: (p_o - p_e) / (1 - p_e)
/// with p_e from the marginal products.
inline KappaResult cohens_kappa(const std::vector<std::pair<std::string, std::string>>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("kappa: no pairs");
    std::map<std::string, long long> h_marg, m_marg;
    long long agree = 0;
    for (const auto& [h, m] : pairs) {
        ++h_marg[h];
        ++m_marg[m];
        if (h == m) ++agree;
    }
    const double n = static_cast<double>(pairs.size());
    const double p_o = static_cast<double>(agree) / n;
    double p_e = 0.0;
    for (const auto& [code, hc] : h_marg) {
        auto it = m_marg.find(code);
        if (it != m_marg.end()) {
            p_e += (static_cast<double>(hc) / n) * (static_cast<double>(it->second) / n);
        }
    }
    if (p_e >= 1.0) {
        return {p_o >= 1.0 ? 1.0 : 0.0, true};
    }
    return {(p_o - p_e) / (1.0 - p_e), false};
}

/// Combine the observed match rate with blinded adjudication: mismatches
/// adjudicated in the model's favor count toward its true accuracy.
inline double estimate_true_accuracy(double match_rate, double adjudicator_agreement_with_model) {
    if (match_rate < 0.0 || match_rate > 1.0 || adjudicator_agreement_with_model < 0.0 ||
        adjudicator_agreement_with_model > 1.0) {
        throw std::invalid_argument("estimate_true_accuracy: inputs must be in [0, 1]");
    }
    return match_rate + (1.0 - match_rate) * adjudicator_agreement_with_model;
}

struct PerCodeMatch {
    long long human_count = 0;   // units the humans gave this code
    long long model_count = 0;   // units the model assigned this code
    long long jointly = 0;       // jointly coded units with this human code
    long long matches = 0;
    double rate = 0.0;           // matches / jointly (0 when unseen)
};

struct MatchReport {
    long long n_units = 0;
    long long n_human_coded = 0;
    long long n_jointly_coded = 0;   // human code present and model reported one
    long long n_unannotated = 0;     // excluded from both rates
    long long n_matches = 0;
    double strict_match_rate = 0.0;  // unreported counts as a mismatch
    double lenient_match_rate = 0.0; // unreported units excluded
    std::map<std::string, PerCodeMatch> per_code_match;
    KappaResult kappa;
    ConfusionMatrix confusion;
    std::map<std::string, long long> human_frequencies;
    std::map<std::string, long long> model_frequencies;
    std::map<std::string, long long> consistency_distribution;
};

struct JoinedUnit {
    std::optional<std::string> human;
    std::optional<std::string> model;
    ConsistencyLabel consistency = ConsistencyLabel::Unreported;
};

/// Pair each model row with the human code for the same unit. Human
/// annotations must reference the same transcript and known units/codes;
/// conflicting duplicate annotations are rejected.
inline std::vector<JoinedUnit> join_units(const CodedResult& model, const std::vector<CodedUnit>& human,
                                          const CodingScheme& scheme) {
    if (human.empty()) throw std::invalid_argument("compare: no human annotations");
    std::map<int, std::string> human_code;
    std::map<int, const RunVotes*> row_of;
    for (const auto& row : model.rows) row_of[row.unit_index] = &row;
    for (const auto& a : human) {
        if (a.transcript_id != model.transcript_id) {
            throw std::runtime_error("compare: annotation transcript '" + a.transcript_id +
                                     "' does not match coded transcript '" + model.transcript_id + "'");
        }
        if (!scheme.find(a.code_id)) {
            throw std::runtime_error("compare: unknown code '" + a.code_id + "'");
        }
        if (!row_of.count(a.unit_index)) {
            throw std::runtime_error("compare: annotation for unit " + std::to_string(a.unit_index) +
                                     " which the coded result does not contain");
        }
        auto [it, inserted] = human_code.emplace(a.unit_index, a.code_id);
        if (!inserted && it->second != a.code_id) {
            throw std::runtime_error("compare: conflicting human codes for unit " +
                                     std::to_string(a.unit_index));
        }
    }
    std::vector<JoinedUnit> joined;
    joined.reserve(model.rows.size());
    for (const auto& row : model.rows) {
        JoinedUnit j;
        auto it = human_code.find(row.unit_index);
        if (it != human_code.end()) j.human = it->second;
        j.model = row.assigned;
        j.consistency = row.consistency;
        joined.push_back(std::move(j));
    }
    return joined;
}

inline MatchReport compute_match_report(const std::vector<JoinedUnit>& units, const CodingScheme& scheme) {
    MatchReport r;
    r.n_units = static_cast<long long>(units.size());
    for (const auto& c : scheme.codes) {
        r.per_code_match[c.code_id] = {};
        r.human_frequencies[c.code_id] = 0;
        r.model_frequencies[c.code_id] = 0;
    }
    r.consistency_distribution = {{"Unreported", 0}, {"Moderate", 0}, {"High", 0}, {"Perfect", 0}};

    std::map<std::string, size_t> axis;
    for (size_t i = 0; i < scheme.codes.size(); ++i) {
        r.confusion.codes.push_back(scheme.codes[i].code_id);
        axis[scheme.codes[i].code_id] = i;
    }
    r.confusion.counts.assign(scheme.codes.size(), std::vector<long long>(scheme.codes.size(), 0));

    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& u : units) {
        ++r.consistency_distribution[to_string(u.consistency)];
        if (u.model) {
            auto it = r.model_frequencies.find(*u.model);
            if (it == r.model_frequencies.end()) throw std::runtime_error("compare: unknown model code '" + *u.model + "'");
            ++it->second;
        }
        if (!u.human) {
            ++r.n_unannotated;
            continue;
        }
        ++r.n_human_coded;
        ++r.human_frequencies[*u.human];
        ++r.per_code_match[*u.human].human_count;
        if (u.model) {
            ++r.per_code_match[*u.model].model_count;
            ++r.n_jointly_coded;
            ++r.per_code_match[*u.human].jointly;
            ++r.confusion.counts[axis[*u.human]][axis[*u.model]];
            ++r.confusion.total;
            pairs.emplace_back(*u.human, *u.model);
            if (*u.human == *u.model) {
                ++r.n_matches;
                ++r.per_code_match[*u.human].matches;
            }
        }
    }
    r.strict_match_rate = r.n_human_coded ? static_cast<double>(r.n_matches) /
                                                static_cast<double>(r.n_human_coded)
                                          : 0.0;
    r.lenient_match_rate = r.n_jointly_coded ? static_cast<double>(r.n_matches) /
                                                   static_cast<double>(r.n_jointly_coded)
                                             : 0.0;
    for (auto& [code, pc] : r.per_code_match) {
        pc.rate = pc.jointly ? static_cast<double>(pc.matches) / static_cast<double>(pc.jointly) : 0.0;
    }
    if (!pairs.empty()) {
        r.kappa = cohens_kappa(pairs);
    } else {
        r.kappa = {0.0, true};
    }
    return r;
}

/// Validate model coding against human coding for one transcript.
inline MatchReport compare(const CodedResult& model, const std::vector<CodedUnit>& human,
                           const CodingScheme& scheme) {
    return compute_match_report(join_units(model, human, scheme), scheme);
}

/// Pooled validation over several transcripts; equivalent to concatenating
/// the joined unit lists.
inline MatchReport compare_pooled(
    const std::vector<std::pair<const CodedResult*, const std::vector<CodedUnit>*>>& pairs,
    const CodingScheme& scheme) {
    if (pairs.empty()) throw std::invalid_argument("compare: no transcript pairs");
    std::vector<JoinedUnit> all;
    for (const auto& [model, human] : pairs) {
        auto joined = join_units(*model, *human, scheme);
        all.insert(all.end(), joined.begin(), joined.end());
    }
    return compute_match_report(all, scheme);
}

// ---------------------------------------------------------------------------
// Blinded mismatch adjudication.
// ---------------------------------------------------------------------------

struct MismatchSample {
    std::string sample_id;
    std::string transcript_id;
    int unit_index = 0;
    std::string context_turn_1;  // two speaking turns before the unit's turn
    std::string context_turn_2;
    std::string unit_text;
    std::string option_1;  // code labels, provenance randomized per sample
    std::string option_2;
};

struct MismatchKeyEntry {
    std::string sample_id;
    int model_option = 1;  // which option holds the model's code
    std::string model_code;
    std::string human_code;
};

struct MismatchExport {
    std::vector<MismatchSample> samples;
    std::vector<MismatchKeyEntry> key;  // stored separately from the export
    bool capped = false;                // fewer mismatches than requested
};

/// Sample k mismatched units without replacement and export them blinded:
/// two code options per unit in seed-randomized order, context attached,
/// nothing in the export saying which option came from the model.
inline MismatchExport sample_mismatches(const CodedResult& model, const std::vector<CodedUnit>& human,
                                        const Transcript& transcript, const CodingScheme& scheme,
                                        size_t k = 100, std::uint64_t seed = 0) {
    auto joined = join_units(model, human, scheme);
    struct Mismatch {
        int unit_index;
        std::string human_code;
        std::string model_code;
    };
    std::vector<Mismatch> mismatches;
    for (size_t i = 0; i < joined.size(); ++i) {
        const auto& j = joined[i];
        if (j.human && j.model && *j.human != *j.model) {
            mismatches.push_back({model.rows[i].unit_index, *j.human, *j.model});
        }
    }
    if (mismatches.empty()) throw std::runtime_error("mismatch export: no mismatches to sample");

    MismatchExport out;
    size_t take = k;
    if (take >= mismatches.size()) {
        take = mismatches.size();
        out.capped = k > mismatches.size();
    }
    Rng rng(seed);
    auto picked = rng.sample_indices(mismatches.size(), take);
    std::sort(picked.begin(), picked.end());

    std::map<int, const RunVotes*> row_of;
    for (const auto& row : model.rows) row_of[row.unit_index] = &row;

    for (size_t i = 0; i < picked.size(); ++i) {
        const auto& m = mismatches[picked[i]];
        const RunVotes* row = row_of.at(m.unit_index);
        MismatchSample s;
        std::ostringstream id;
        id << "m" << std::setw(4) << std::setfill('0') << i + 1;
        s.sample_id = id.str();
        s.transcript_id = model.transcript_id;
        s.unit_index = m.unit_index;
        int t = row->turn_index;
        auto turn_text = [&](int ti) -> std::string {
            if (ti < 0 || ti >= static_cast<int>(transcript.turns.size())) return "";
            const auto& turn = transcript.turns[static_cast<size_t>(ti)];
            return turn.speaker + ": " + text::collapse_whitespace(turn.text);
        };
        s.context_turn_1 = turn_text(t - 2);
        s.context_turn_2 = turn_text(t - 1);
        s.unit_text = row->text;
        std::string model_label = scheme.find(m.model_code)->label;
        std::string human_label = scheme.find(m.human_code)->label;
        bool model_first = rng.bounded(2) == 0;
        s.option_1 = model_first ? model_label : human_label;
        s.option_2 = model_first ? human_label : model_label;
        out.key.push_back({s.sample_id, model_first ? 1 : 2, m.model_code, m.human_code});
        out.samples.push_back(std::move(s));
    }
    return out;
}

inline std::string mismatch_export_csv(const MismatchExport& e) {
    std::string out =
        "sample_id,context_turn_1,context_turn_2,unit_text,option_1,option_2\n";
    for (const auto& s : e.samples) {
        out += csv::format_row(
            {s.sample_id, s.context_turn_1, s.context_turn_2, s.unit_text, s.option_1, s.option_2});
    }
    return out;
}

inline std::string mismatch_key_csv(const MismatchExport& e) {
    std::string out = "sample_id,model_option,model_code,human_code\n";
    for (const auto& k : e.key) {
        out += csv::format_row({k.sample_id, std::to_string(k.model_option), k.model_code, k.human_code});
    }
    return out;
}

inline std::vector<MismatchKeyEntry> parse_mismatch_key(std::string_view csv_text) {
    auto rows = csv::parse(csv_text);
    if (rows.empty() || rows[0].size() < 4 || rows[0][0] != "sample_id") {
        throw std::runtime_error("mismatch key: bad header");
    }
    std::vector<MismatchKeyEntry> out;
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() < 4) throw std::runtime_error("mismatch key: short row");
        out.push_back({rows[i][0], std::stoi(rows[i][1]), rows[i][2], rows[i][3]});
    }
    return out;
}

struct Adjudication {
    std::string sample_id;
    std::string chosen;  // option_1 | option_2 | neither
    std::string adjudicator_id;
};

inline std::vector<Adjudication> parse_adjudications(std::string_view csv_text) {
    auto rows = csv::parse(csv_text);
    if (rows.empty() || rows[0].size() < 2 || rows[0][0] != "sample_id" || rows[0][1] != "chosen") {
        throw std::runtime_error("adjudications: header must be sample_id,chosen[,adjudicator_id]");
    }
    std::vector<Adjudication> out;
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() == 1 && text::trim(row[0]).empty()) continue;
        Adjudication a;
        a.sample_id = text::trim(row[0]);
        a.chosen = text::trim(row[1]);
        a.adjudicator_id = row.size() > 2 && !text::trim(row[2]).empty() ? text::trim(row[2]) : "adjudicator";
        if (a.chosen != "option_1" && a.chosen != "option_2" && a.chosen != "neither") {
            throw std::runtime_error("adjudications: chosen must be option_1, option_2 or neither (row " +
                                     std::to_string(i + 1) + ")");
        }
        out.push_back(std::move(a));
    }
    return out;
}

struct AdjudicationRates {
    long long n = 0;
    double agree_with_model_rate = 0.0;
    double agree_with_human_rate = 0.0;
    double neither_rate = 0.0;
};

struct AdjudicationSummary {
    AdjudicationRates pooled;
    std::map<std::string, AdjudicationRates> per_adjudicator;
    std::optional<double> implied_accuracy;  // set when a match rate is supplied
    std::vector<std::string> warnings;
};

/// Resolve blinded choices against the hidden key. A duplicate adjudication
/// of one sample by one adjudicator is replaced by the later row (with a
/// warning); the three rates sum to one.
inline AdjudicationSummary ingest_adjudications(const std::vector<Adjudication>& adjudications,
                                                const std::vector<MismatchKeyEntry>& key,
                                                std::optional<double> lenient_match_rate = std::nullopt) {
    std::map<std::string, int> model_option;
    for (const auto& k : key) model_option[k.sample_id] = k.model_option;

    std::map<std::pair<std::string, std::string>, std::string> final_choice;
    AdjudicationSummary out;
    for (const auto& a : adjudications) {
        auto it = model_option.find(a.sample_id);
        if (it == model_option.end()) {
            throw std::runtime_error("adjudications: unknown sample_id '" + a.sample_id + "'");
        }
        auto keypair = std::make_pair(a.sample_id, a.adjudicator_id);
        if (final_choice.count(keypair)) {
            out.warnings.push_back("duplicate adjudication for " + a.sample_id + " by " +
                                   a.adjudicator_id + "; keeping the later row");
        }
        final_choice[keypair] = a.chosen;
    }
    if (final_choice.empty()) throw std::invalid_argument("adjudications: no rows");

    std::map<std::string, std::array<long long, 3>> per;  // adjudicator -> {model, human, neither}
    std::array<long long, 3> pooled = {0, 0, 0};
    for (const auto& [keypair, chosen] : final_choice) {
        int opt = model_option[keypair.first];
        size_t bucket;
        if (chosen == "neither") {
            bucket = 2;
        } else {
            int chosen_opt = chosen == "option_1" ? 1 : 2;
            bucket = chosen_opt == opt ? 0 : 1;
        }
        ++pooled[bucket];
        ++per[keypair.second][bucket];
    }
    auto to_rates = [](const std::array<long long, 3>& c) {
        AdjudicationRates r;
        r.n = c[0] + c[1] + c[2];
        double n = static_cast<double>(r.n);
        r.agree_with_model_rate = static_cast<double>(c[0]) / n;
        r.agree_with_human_rate = static_cast<double>(c[1]) / n;
        r.neither_rate = static_cast<double>(c[2]) / n;
        return r;
    };
    out.pooled = to_rates(pooled);
    for (const auto& [adjudicator, counts] : per) out.per_adjudicator[adjudicator] = to_rates(counts);
    if (lenient_match_rate) {
        out.implied_accuracy = estimate_true_accuracy(*lenient_match_rate, out.pooled.agree_with_model_rate);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report artifacts.
// ---------------------------------------------------------------------------

inline std::string confusion_csv(const ConfusionMatrix& m) {
    std::vector<std::string> header = {"human\\model"};
    header.insert(header.end(), m.codes.begin(), m.codes.end());
    std::string out = csv::format_row(header);
    for (size_t h = 0; h < m.codes.size(); ++h) {
        std::vector<std::string> row = {m.codes[h]};
        for (size_t c = 0; c < m.codes.size(); ++c) row.push_back(std::to_string(m.counts[h][c]));
        out += csv::format_row(row);
    }
    return out;
}

inline nlohmann::json match_report_json(const MatchReport& r) {
    nlohmann::json j;
    j["n_units"] = r.n_units;
    j["n_human_coded"] = r.n_human_coded;
    j["n_jointly_coded"] = r.n_jointly_coded;
    j["n_unannotated"] = r.n_unannotated;
    j["n_matches"] = r.n_matches;
    j["strict_match_rate"] = r.strict_match_rate;
    j["lenient_match_rate"] = r.lenient_match_rate;
    j["kappa"] = r.kappa.value;
    j["kappa_degenerate"] = r.kappa.degenerate;
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [code, pc] : r.per_code_match) {
        per[code] = {{"human_count", pc.human_count},
                     {"model_count", pc.model_count},
                     {"jointly", pc.jointly},
                     {"matches", pc.matches},
                     {"rate", pc.rate}};
    }
    j["per_code_match"] = per;
    j["human_frequencies"] = r.human_frequencies;
    j["model_frequencies"] = r.model_frequencies;
    j["consistency_distribution"] = r.consistency_distribution;
    nlohmann::json conf;
    conf["codes"] = r.confusion.codes;
    conf["counts"] = r.confusion.counts;
    conf["total"] = r.confusion.total;
    j["confusion"] = conf;
    return j;
}

inline std::string match_report_table(const MatchReport& r) {
    std::ostringstream os;
    os << std::fixed;
    os << "units:            " << r.n_units << "\n";
    os << "human coded:      " << r.n_human_coded << "\n";
    os << "jointly coded:    " << r.n_jointly_coded << "\n";
    os << "matches:          " << r.n_matches << "\n";
    os << "strict match:     " << std::setprecision(4) << r.strict_match_rate << "\n";
    os << "lenient match:    " << std::setprecision(4) << r.lenient_match_rate << "\n";
    os << "cohen's kappa:    " << std::setprecision(4) << r.kappa.value
       << (r.kappa.degenerate ? " (degenerate)" : "") << "\n";
    os << "consistency:      ";
    bool first = true;
    for (const auto& [label, n] : r.consistency_distribution) {
        if (!first) os << ", ";
        os << label << " " << n;
        first = false;
    }
    os << "\n\nper-code match (human count / model count / matched / rate):\n";
    for (const auto& [code, pc] : r.per_code_match) {
        os << "  " << std::left << std::setw(36) << code << std::right << std::setw(6)
           << pc.human_count << std::setw(6) << pc.model_count << std::setw(6) << pc.matches << "  "
           << std::setprecision(4) << pc.rate << "\n";
    }
    return os.str();
}

}  // namespace convcode
