// Copyright 2026 The convcode Authors
// SPDX-License-Identifier: Apache-2.0
//
// convcode: code conversation transcripts against a coding scheme with an
// LLM completion backend, vote over repeated runs, and validate the result
// against human coding.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "convcode/evaluation.hpp"
#include "convcode/io.hpp"
#include "convcode/prompt.hpp"
#include "convcode/runner.hpp"
#include "convcode/selection.hpp"

namespace fs = std::filesystem;
using namespace convcode;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

struct CliOptions {
    // shared inputs
    std::string scheme;
    std::string transcript_path;
    std::string exemplars_dir;
    std::string out_dir = "out";
    std::string dump_prompt_dir;

    // backend
    std::string backend = "mock";
    std::string endpoint_url;
    std::string model_id;
    std::string auth_token_env_var;
    int timeout_ms = 30000;
    int max_retries = 3;
    int retry_backoff_ms = 250;
    std::string request_style = "prompt";
    std::string response_text_path = "completion";
    std::string mock_script;
    std::uint64_t mock_seed = 0;
    bool mock_seed_given = false;

    // run shape
    int runs = 5;
    int vote_threshold = 3;
    size_t max_sentences = 100;
    size_t context_turns = 2;
    double temperature = 0.2;
    std::uint64_t seed = 0;
    bool seed_given = false;
    double similarity_threshold = 0.8;
    int max_in_flight = 5;
    int max_output_tokens = 4096;
    int floor = kDefaultExampleFloor;
    bool allow_sparse = false;
    std::string unit;  // empty: use the scheme's
    std::string profile;
    double reserve_fraction = 0.25;

    // prompt options
    bool speaker_context = true;
    bool adjacent_context = true;
    bool include_case_description = false;
    bool xml_tags = false;
    bool chain_of_thought = false;
    std::string case_description;

    // validate / mismatch / selection
    std::vector<std::string> report_paths;
    std::vector<std::string> human_paths;
    std::string adjudications_path;
    std::string key_path;
    std::optional<double> match_rate;
    std::string match_report_path;
    size_t mismatch_k = 100;
    std::string export_path = "mismatch_export.csv";
    std::string pool_dir;
    std::string validation_dir;
    size_t select_k = 5;
    size_t select_candidates = 5;
    size_t max_attempts = 100000;
    std::string leaderboard_path = "leaderboard.csv";

    std::string show_target;

    std::vector<ModelProfile> extra_profiles;  // config-defined, same fields as builtins
};

std::optional<ModelProfile> resolve_profile(const CliOptions& o, const std::string& name) {
    for (const auto& p : o.extra_profiles) {
        if (text::to_lower(p.model_name) == text::to_lower(name)) return p;
    }
    return find_profile(name);
}

void apply_config_file(CliOptions& o, const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const std::exception& e) {
        throw std::runtime_error("config: cannot read " + path + ": " + e.what());
    }
    auto str = [&](const char* key, std::string& into) {
        if (j.contains(key)) into = j[key].get<std::string>();
    };
    auto val = [&](const char* key, auto& into) {
        if (j.contains(key)) into = j[key];
    };
    str("scheme", o.scheme);
    str("backend", o.backend);
    str("endpoint_url", o.endpoint_url);
    str("model_id", o.model_id);
    str("auth_token_env_var", o.auth_token_env_var);
    val("timeout_ms", o.timeout_ms);
    val("max_retries", o.max_retries);
    val("retry_backoff_ms", o.retry_backoff_ms);
    str("request_style", o.request_style);
    str("response_text_path", o.response_text_path);
    str("mock_script", o.mock_script);
    if (j.contains("mock_seed")) {
        o.mock_seed = j["mock_seed"].get<std::uint64_t>();
        o.mock_seed_given = true;
    }
    val("runs", o.runs);
    val("vote_threshold", o.vote_threshold);
    val("max_sentences", o.max_sentences);
    val("context_turns", o.context_turns);
    val("temperature", o.temperature);
    if (j.contains("seed")) {
        o.seed = j["seed"].get<std::uint64_t>();
        o.seed_given = true;
    }
    val("similarity_threshold", o.similarity_threshold);
    val("max_in_flight", o.max_in_flight);
    val("max_output_tokens", o.max_output_tokens);
    val("floor", o.floor);
    val("allow_sparse", o.allow_sparse);
    str("unit", o.unit);
    str("profile", o.profile);
    val("reserve_fraction", o.reserve_fraction);
    val("speaker_context", o.speaker_context);
    val("adjacent_context", o.adjacent_context);
    val("include_case_description", o.include_case_description);
    val("xml_tags", o.xml_tags);
    val("chain_of_thought", o.chain_of_thought);
    str("case_description", o.case_description);
    if (j.contains("profiles")) {
        for (const auto& jp : j["profiles"]) {
            ModelProfile p;
            p.model_name = jp.at("model_name").get<std::string>();
            p.context_length_tokens = jp.at("context_length_tokens").get<long long>();
            p.approx_word_capacity = jp.at("approx_word_capacity").get<long long>();
            p.release_note = jp.value("release_note", "");
            if (p.approx_word_capacity > p.context_length_tokens) {
                throw std::runtime_error("config: profile '" + p.model_name +
                                         "' word capacity exceeds its token length");
            }
            o.extra_profiles.push_back(std::move(p));
        }
    }
}

BackendConfig backend_config(const CliOptions& o) {
    BackendConfig cfg;
    if (o.backend == "http") {
        cfg.kind = BackendKind::Http;
    } else if (o.backend == "mock") {
        cfg.kind = BackendKind::Mock;
    } else {
        throw std::runtime_error("backend must be 'mock' or 'http', got '" + o.backend + "'");
    }
    cfg.endpoint_url = o.endpoint_url;
    cfg.model_id = o.model_id;
    cfg.auth_token_env_var = o.auth_token_env_var;
    cfg.timeout_ms = o.timeout_ms;
    cfg.max_retries = o.max_retries;
    cfg.retry_backoff_ms = o.retry_backoff_ms;
    cfg.request_style = o.request_style;
    cfg.response_text_path = o.response_text_path;
    cfg.mock_script_path = o.mock_script;
    cfg.mock_seed = o.mock_seed_given ? o.mock_seed : o.seed;
    return cfg;
}

RunnerConfig runner_config(const CliOptions& o) {
    RunnerConfig rc;
    rc.runs = o.runs;
    rc.vote_threshold = o.vote_threshold;
    rc.max_units_per_segment = o.max_sentences;
    rc.context_turns = o.context_turns;
    rc.temperature = o.temperature;
    rc.seed = o.seed;
    rc.similarity_threshold = o.similarity_threshold;
    rc.max_in_flight = o.max_in_flight;
    rc.max_output_tokens = o.max_output_tokens;
    rc.example_floor = o.floor;
    rc.allow_sparse = o.allow_sparse;
    rc.prompt.include_speaker_context = o.speaker_context;
    rc.prompt.include_adjacent_context_instruction = o.adjacent_context;
    rc.prompt.include_case_description = o.include_case_description;
    rc.prompt.use_xml_tags = o.xml_tags;
    rc.prompt.use_chain_of_thought = o.chain_of_thought;
    rc.prompt.case_description = o.case_description;
    if (!o.unit.empty()) rc.unit_override = unit_of_analysis_from_string(o.unit);
    if (!o.profile.empty()) {
        auto p = resolve_profile(o, o.profile);
        if (!p) throw std::runtime_error("unknown model profile '" + o.profile + "'");
        rc.budget_profile = *p;
    }
    rc.reserve_fraction = o.reserve_fraction;
    return rc;
}

void ensure_seed(CliOptions& o) {
    if (o.seed_given) return;
    std::random_device rd;
    o.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    o.seed_given = true;
}

CodingScheme load_scheme_arg(const CliOptions& o) {
    if (o.scheme.empty()) throw std::runtime_error("--scheme is required (builtin name or file)");
    std::vector<std::string> warnings;
    auto scheme = resolve_scheme(o.scheme, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    return scheme;
}

ExemplarSet load_exemplars_arg(const CliOptions& o, const CodingScheme& scheme) {
    if (o.exemplars_dir.empty() || o.exemplars_dir == "ideal") {
        return ExemplarSet::from_ideal(scheme);
    }
    return load_exemplar_dir(o.exemplars_dir, scheme);
}

void warn_sparse(const ExemplarSet& exemplars, const CodingScheme& scheme, const CliOptions& o) {
    if (exemplars.mode != ExemplarMode::CodedTranscripts || !o.allow_sparse) return;
    auto deficits = find_underrepresented(exemplars, scheme, o.floor);
    for (const auto& d : deficits) {
        std::cerr << "warning: code '" << d.code_id << "' has only " << d.natural + d.supplement
                  << " examples (floor " << o.floor << ", deficit " << d.deficit << ")\n";
    }
}

void dump_prompts(const std::string& dir, const std::vector<SegmentOutcome>& segments) {
    for (const auto& seg : segments) {
        char name[32];
        std::snprintf(name, sizeof(name), "prompt_%03d.txt", seg.segment_index);
        write_file(fs::path(dir) / name, seg.prompt_text);
    }
}

// ---------------------------------------------------------------------------

int cmd_code(CliOptions& o) {
    ensure_seed(o);
    auto scheme = load_scheme_arg(o);
    if (o.transcript_path.empty()) throw std::runtime_error("--transcript is required");
    auto transcript = load_transcript_file(o.transcript_path);
    auto exemplars = load_exemplars_arg(o, scheme);
    warn_sparse(exemplars, scheme, o);

    std::cout << "seed: " << o.seed << "\n";
    auto result = code_transcript(transcript, scheme, exemplars, backend_config(o), runner_config(o));

    fs::path out(o.out_dir);
    write_file(out / "coded.csv", coded_csv(result));
    write_file(out / "report.json", coded_report_json(result).dump(2) + "\n");
    for (const auto& seg : result.segments) {
        char segdir[32];
        std::snprintf(segdir, sizeof(segdir), "segment_%03d", seg.segment_index);
        fs::path raw = out / "raw" / segdir;
        write_file(raw / "prompt.txt", seg.prompt_text);
        for (size_t run = 0; run < seg.raw_responses.size(); ++run) {
            write_file(raw / ("run_" + std::to_string(run + 1) + ".txt"), seg.raw_responses[run]);
        }
    }
    if (!o.dump_prompt_dir.empty()) dump_prompts(o.dump_prompt_dir, result.segments);

    std::cout << "coded " << result.rows.size() << " units in " << result.segments.size()
              << " segment(s)\n";
    for (const auto& seg : result.segments) {
        std::cout << "  segment " << seg.segment_index << ": ~"
                  << estimate_tokens(seg.prompt_text) << " prompt tokens x " << result.runs
                  << " runs\n";
    }
    for (const auto& [label, count] : result.consistency_counts()) {
        std::cout << "  " << label << ": " << count << "\n";
    }
    for (const auto& seg : result.segments) {
        if (seg.failed) {
            std::cerr << "warning: segment " << seg.segment_index << " failed (" << seg.runs_failed
                      << " of " << result.runs << " runs unusable)\n";
        }
    }
    std::cout << "wrote " << (out / "coded.csv").string() << "\n";
    std::cout << "wrote " << (out / "report.json").string() << "\n";
    return result.any_segment_failed() ? kExitPartial : kExitOk;
}

int cmd_validate(CliOptions& o) {
    auto scheme = load_scheme_arg(o);
    if (o.report_paths.empty() || o.report_paths.size() != o.human_paths.size()) {
        throw std::runtime_error(
            "validate needs matching --report and --human files (one pair per transcript)");
    }
    std::vector<CodedResult> results;
    std::vector<std::vector<CodedUnit>> humans;
    for (size_t i = 0; i < o.report_paths.size(); ++i) {
        results.push_back(parse_coded_report(read_file(o.report_paths[i])));
        humans.push_back(load_annotations(read_file(o.human_paths[i]), &scheme));
    }
    std::vector<std::pair<const CodedResult*, const std::vector<CodedUnit>*>> pairs;
    for (size_t i = 0; i < results.size(); ++i) pairs.emplace_back(&results[i], &humans[i]);
    auto pooled = compare_pooled(pairs, scheme);

    fs::path out(o.out_dir);
    nlohmann::json j;
    j["pooled"] = match_report_json(pooled);
    if (pairs.size() > 1) {
        nlohmann::json per = nlohmann::json::object();
        for (size_t i = 0; i < pairs.size(); ++i) {
            per[results[i].transcript_id] = match_report_json(compare(results[i], humans[i], scheme));
        }
        j["per_transcript"] = per;
    }
    write_file(out / "match_report.json", j.dump(2) + "\n");
    write_file(out / "match_report.txt", match_report_table(pooled));
    write_file(out / "confusion.csv", confusion_csv(pooled.confusion));
    std::cout << match_report_table(pooled);
    std::cout << "wrote " << (out / "match_report.json").string() << "\n";
    return kExitOk;
}

int cmd_mismatch_export(CliOptions& o) {
    ensure_seed(o);
    auto scheme = load_scheme_arg(o);
    if (o.report_paths.size() != 1 || o.human_paths.size() != 1 || o.transcript_path.empty()) {
        throw std::runtime_error("mismatch export needs --report, --human and --transcript");
    }
    auto result = parse_coded_report(read_file(o.report_paths[0]));
    auto human = load_annotations(read_file(o.human_paths[0]), &scheme);
    auto transcript = load_transcript_file(o.transcript_path);
    std::cout << "seed: " << o.seed << "\n";
    auto exported = sample_mismatches(result, human, transcript, scheme, o.mismatch_k, o.seed);
    if (exported.capped) {
        std::cerr << "warning: only " << exported.samples.size()
                  << " mismatches exist; exporting them all\n";
    }
    write_file(o.export_path, mismatch_export_csv(exported));
    write_file(o.key_path, mismatch_key_csv(exported));
    std::cout << "exported " << exported.samples.size() << " blinded samples to " << o.export_path
              << "\n";
    std::cout << "hidden key (do not share with adjudicators): " << o.key_path << "\n";
    return kExitOk;
}

int cmd_mismatch_ingest(CliOptions& o) {
    auto adjudications = parse_adjudications(read_file(o.adjudications_path));
    auto key = parse_mismatch_key(read_file(o.key_path));
    std::optional<double> rate = o.match_rate;
    if (!rate && !o.match_report_path.empty()) {
        auto j = nlohmann::json::parse(read_file(o.match_report_path));
        if (j.contains("pooled")) {
            rate = j["pooled"]["lenient_match_rate"].get<double>();
        } else if (j.contains("lenient_match_rate")) {
            rate = j["lenient_match_rate"].get<double>();
        }
    }
    auto summary = ingest_adjudications(adjudications, key, rate);
    for (const auto& w : summary.warnings) std::cerr << "warning: " << w << "\n";
    std::printf("adjudications:         %lld\n", summary.pooled.n);
    std::printf("agree with model:      %.4f\n", summary.pooled.agree_with_model_rate);
    std::printf("agree with human:      %.4f\n", summary.pooled.agree_with_human_rate);
    std::printf("neither:               %.4f\n", summary.pooled.neither_rate);
    if (summary.per_adjudicator.size() > 1) {
        for (const auto& [who, r] : summary.per_adjudicator) {
            std::printf("  %s: n=%lld model=%.4f human=%.4f neither=%.4f\n", who.c_str(), r.n,
                        r.agree_with_model_rate, r.agree_with_human_rate, r.neither_rate);
        }
    }
    if (summary.implied_accuracy) {
        std::printf("implied true accuracy: %.4f\n", *summary.implied_accuracy);
    }
    return kExitOk;
}

std::vector<CodedTranscript> load_coded_pairs(const std::string& dir, const CodingScheme& scheme) {
    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file()) entries.push_back(e.path());
    }
    std::sort(entries.begin(), entries.end());
    std::vector<CodedTranscript> out;
    for (const auto& p : entries) {
        std::string name = p.filename().string();
        if (name.ends_with(".codes.csv")) continue;
        if (p.extension() != ".txt" && p.extension() != ".csv") continue;
        fs::path codes = p;
        codes.replace_extension();
        codes += ".codes.csv";
        if (!fs::exists(codes)) {
            throw std::runtime_error(dir + ": transcript '" + name + "' has no matching codes file");
        }
        CodedTranscript ct;
        ct.transcript = load_transcript_file(p);
        ct.annotations = load_annotations(read_file(codes), &scheme);
        out.push_back(std::move(ct));
    }
    if (out.empty()) throw std::runtime_error(dir + ": no transcript/codes pairs found");
    return out;
}

int cmd_select_training(CliOptions& o) {
    ensure_seed(o);
    auto scheme = load_scheme_arg(o);
    if (o.pool_dir.empty() || o.validation_dir.empty()) {
        throw std::runtime_error("select-training needs --pool and --validation directories");
    }
    auto pool = TranscriptPool::build(load_coded_pairs(o.pool_dir, scheme), scheme);
    auto validation = load_coded_pairs(o.validation_dir, scheme);

    std::cout << "seed: " << o.seed << "\n";
    unsigned long long total = combination_count(pool.transcripts.size(), o.select_k);
    std::cout << "pool of " << pool.transcripts.size() << " transcripts: " << total
              << " possible combinations of " << o.select_k << "\n";

    auto candidates =
        sample_covering_sets(pool, scheme, o.select_k, o.select_candidates, o.seed, o.max_attempts);
    std::cout << "sampled " << candidates.size() << " covering candidate sets\n";
    auto result = select_best(std::move(candidates), pool, validation, scheme, backend_config(o),
                              runner_config(o));
    write_file(o.leaderboard_path, leaderboard_csv(result.leaderboard));
    std::cout << "winner: " << result.winner.joined_members();
    std::printf(" (lenient %.4f, strict %.4f, kappa %.4f)\n", *result.winner.lenient,
                *result.winner.strict, *result.winner.kappa);
    std::cout << "wrote " << o.leaderboard_path << "\n";
    return kExitOk;
}

int cmd_budget(CliOptions& o) {
    auto scheme = load_scheme_arg(o);
    if (o.transcript_path.empty()) throw std::runtime_error("--transcript is required");
    auto transcript = load_transcript_file(o.transcript_path);
    auto exemplars = load_exemplars_arg(o, scheme);
    auto rc = runner_config(o);

    UnitOfAnalysis unit = rc.unit_override.value_or(scheme.unit_of_analysis);
    auto units = units_for(transcript, unit);
    auto segments = segment_units(units, rc.max_units_per_segment, rc.context_turns);
    long long worst = 0;
    std::vector<SegmentOutcome> for_dump;
    for (const auto& seg : segments) {
        auto p = build_prompt(scheme, exemplars, seg, rc.prompt, rc.example_floor, true);
        worst = std::max(worst, p.estimated_tokens);
        SegmentOutcome s;
        s.segment_index = seg.segment_index;
        s.prompt_text = p.text;
        for_dump.push_back(std::move(s));
        std::cout << "segment " << seg.segment_index << ": " << seg.sentences.size() << " units, ~"
                  << p.estimated_tokens << " tokens\n";
    }
    if (!o.dump_prompt_dir.empty()) dump_prompts(o.dump_prompt_dir, for_dump);

    std::vector<ModelProfile> profiles;
    if (!o.profile.empty()) {
        auto p = resolve_profile(o, o.profile);
        if (!p) throw std::runtime_error("unknown model profile '" + o.profile + "'");
        profiles.push_back(*p);
    } else {
        profiles = builtin_profiles();
        profiles.insert(profiles.end(), o.extra_profiles.begin(), o.extra_profiles.end());
    }
    std::cout << "largest prompt: ~" << worst << " tokens (reserving "
              << static_cast<int>(o.reserve_fraction * 100) << "% of context for output)\n";
    PromptText probe;
    probe.estimated_tokens = worst;
    for (const auto& p : profiles) {
        auto b = check_budget(probe, p, o.reserve_fraction);
        std::string verdict =
            b.fits ? "fits" : "exceeds by " + std::to_string(b.over_by_tokens) + " tokens";
        std::printf("  %-9s %9lld tokens / %7lld words: %s\n", p.model_name.c_str(),
                    p.context_length_tokens, p.approx_word_capacity, verdict.c_str());
    }
    return kExitOk;
}

int cmd_schemes_list() {
    for (const auto& name : builtin_scheme_names()) {
        auto s = *builtin_scheme(name);
        std::cout << name << ": " << s.name << ", unit " << to_string(s.unit_of_analysis) << "\n";
    }
    return kExitOk;
}

int cmd_schemes_show(const CliOptions& o) {
    std::vector<std::string> warnings;
    auto s = resolve_scheme(o.show_target, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    std::cout << s.scheme_id << ": " << s.name << "\n";
    std::cout << "unit of analysis: " << to_string(s.unit_of_analysis) << "\n";
    for (size_t i = 0; i < s.codes.size(); ++i) {
        const auto& c = s.codes[i];
        std::cout << "  " << i + 1 << ". " << c.label << " [" << c.code_id << "]\n";
        std::cout << "     " << c.definition << "\n";
        if (!c.extra_instructions.empty()) {
            std::cout << "     guidance: " << c.extra_instructions << "\n";
        }
        for (const auto& e : c.example_sentences) std::cout << "     e.g. " << e.sentence << "\n";
    }
    if (!s.supplements.empty()) {
        std::cout << "supplements:\n";
        for (const auto& [code, sentences] : s.supplements) {
            std::cout << "  " << code << ": " << sentences.size() << " sentence(s)\n";
        }
    }
    return kExitOk;
}

void add_backend_options(CLI::App* cmd, CliOptions& o) {
    cmd->add_option("--backend", o.backend, "Completion backend: mock or http")
        ->check(CLI::IsMember({"mock", "http"}));
    cmd->add_option("--endpoint-url", o.endpoint_url, "HTTP completion endpoint");
    cmd->add_option("--model-id", o.model_id, "Model identifier sent in the request body");
    cmd->add_option("--auth-token-env", o.auth_token_env_var,
                    "Name of the env var holding the bearer token");
    cmd->add_option("--timeout-ms", o.timeout_ms, "Per-request timeout");
    cmd->add_option("--max-retries", o.max_retries, "Total attempts for transient failures");
    cmd->add_option("--retry-backoff-ms", o.retry_backoff_ms, "Initial backoff, doubling per retry");
    cmd->add_option("--request-style", o.request_style, "JSON body style: prompt or messages")
        ->check(CLI::IsMember({"prompt", "messages"}));
    cmd->add_option("--response-text-path", o.response_text_path,
                    "Dot path to the completion text in the response JSON");
    cmd->add_option("--mock-script", o.mock_script, "Mock script file (mock backend)");
    cmd->add_option("--mock-seed", o.mock_seed, "Mock determinism seed (defaults to --seed)")
        ->each([&o](const std::string&) { o.mock_seed_given = true; });
}

void add_run_options(CLI::App* cmd, CliOptions& o, bool with_budget_profile = true) {
    cmd->add_option("--runs", o.runs, "Coding runs per segment");
    cmd->add_option("--threshold", o.vote_threshold, "Votes required to report a code");
    cmd->add_option("--max-sentences", o.max_sentences, "Largest segment handed to the model");
    cmd->add_option("--context-turns", o.context_turns, "Preceding turns attached as context");
    cmd->add_option("--temperature", o.temperature, "Sampling temperature");
    cmd->add_option("--seed", o.seed, "Reproducibility seed (random when omitted)")
        ->each([&o](const std::string&) { o.seed_given = true; });
    cmd->add_option("--similarity", o.similarity_threshold, "Alignment similarity threshold");
    cmd->add_option("--max-in-flight", o.max_in_flight, "Concurrent requests per segment");
    cmd->add_option("--max-output-tokens", o.max_output_tokens, "Output budget per request");
    cmd->add_option("--floor", o.floor, "Minimum examples per code in the learning material");
    cmd->add_flag("--allow-sparse", o.allow_sparse, "Proceed despite under-represented codes");
    cmd->add_option("--unit", o.unit, "Unit of analysis override")
        ->check(CLI::IsMember({"sentence", "speaking-turn", "thought-unit"}));
    if (with_budget_profile) {
        cmd->add_option("--profile", o.profile, "Model profile for the token budget check");
    }
    cmd->add_option("--reserve", o.reserve_fraction, "Context fraction reserved for output");
}

void add_config_option(CLI::App* cmd) {
    // Applied in a pre-parse pass over argv; registered here so CLI11 accepts
    // the flag in any position.
    static std::string sink;
    cmd->add_option("--config", sink, "JSON config file with option defaults");
}

void add_prompt_options(CLI::App* cmd, CliOptions& o) {
    cmd->add_flag("--speaker-context,!--no-speaker-context", o.speaker_context,
                  "Show speakers and the who-is-speaking instruction");
    cmd->add_flag("--adjacent-context,!--no-adjacent-context", o.adjacent_context,
                  "Instruct the model to use neighboring sentences");
    cmd->add_flag("--include-case-description", o.include_case_description,
                  "Include the case description paragraph");
    cmd->add_option("--case-description", o.case_description, "Case description text");
    cmd->add_flag("--xml-tags", o.xml_tags, "Wrap prompt sections in tags");
    cmd->add_flag("--chain-of-thought", o.chain_of_thought, "Ask for a rationale per line");
    cmd->add_option("--dump-prompt", o.dump_prompt_dir, "Write the exact prompts to this directory");
}

}  // namespace

int main(int argc, char** argv) {
    CliOptions o;

    // The config file seeds defaults; explicit flags win.
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                apply_config_file(o, argv[i + 1]);
            } catch (const std::exception& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kExitFatal;
            }
        }
    }

    CLI::App app{"convcode: LLM-assisted coding of conversation transcripts"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file with option defaults");

    int rc = kExitOk;

    auto* code = app.add_subcommand("code", "Code a transcript with repeated runs and voting");
    code->add_option("--scheme", o.scheme, "Builtin scheme name or scheme file");
    code->add_option("--transcript", o.transcript_path,
                     "Transcript file (.txt labeled lines, .csv turn-csv)");
    code->add_option("--exemplars", o.exemplars_dir,
                     "Exemplar directory, or 'ideal' for scheme examples");
    code->add_option("--out", o.out_dir, "Output directory");
    add_backend_options(code, o);
    add_run_options(code, o);
    add_prompt_options(code, o);
    add_config_option(code);
    code->callback([&] { rc = cmd_code(o); });

    auto* validate = app.add_subcommand("validate", "Compare coded reports against human coding");
    validate->add_option("--scheme", o.scheme, "Builtin scheme name or scheme file");
    validate->add_option("--report", o.report_paths, "Coded report.json (repeat per transcript)");
    validate->add_option("--human", o.human_paths, "Human annotation CSV (repeat, paired in order)");
    validate->add_option("--out", o.out_dir, "Output directory");
    add_config_option(validate);
    validate->callback([&] { rc = cmd_validate(o); });

    auto* mismatch = app.add_subcommand("mismatch", "Blinded mismatch adjudication workflow");
    mismatch->require_subcommand(1);
    auto* mexport = mismatch->add_subcommand("export", "Sample mismatches into a blinded spreadsheet");
    mexport->add_option("--scheme", o.scheme, "Builtin scheme name or scheme file");
    mexport->add_option("--report", o.report_paths, "Coded report.json");
    mexport->add_option("--human", o.human_paths, "Human annotation CSV");
    mexport->add_option("--transcript", o.transcript_path, "Transcript file (context turns)");
    mexport->add_option("--k", o.mismatch_k, "Samples to draw");
    mexport->add_option("--seed", o.seed, "Sampling seed")->each([&o](const std::string&) {
        o.seed_given = true;
    });
    mexport->add_option("--out", o.export_path, "Blinded export CSV path");
    mexport->add_option("--key", o.key_path, "Hidden key CSV path")->required();
    add_config_option(mexport);
    mexport->callback([&] { rc = cmd_mismatch_export(o); });
    auto* mingest = mismatch->add_subcommand("ingest", "Score adjudications against the hidden key");
    mingest->add_option("--adjudications", o.adjudications_path, "Adjudication CSV")->required();
    mingest->add_option("--key", o.key_path, "Hidden key CSV")->required();
    mingest->add_option("--match-rate", o.match_rate, "Lenient match rate for the implied accuracy");
    mingest->add_option("--match-report", o.match_report_path,
                        "match_report.json to read the rate from");
    add_config_option(mingest);
    mingest->callback([&] { rc = cmd_mismatch_ingest(o); });

    auto* select =
        app.add_subcommand("select-training", "Sample covering exemplar sets and pick the best");
    select->add_option("--scheme", o.scheme, "Builtin scheme name or scheme file");
    select->add_option("--pool", o.pool_dir, "Directory of coded transcripts to choose from");
    select->add_option("--validation", o.validation_dir, "Directory of coded validation transcripts");
    select->add_option("--k", o.select_k, "Transcripts per candidate set");
    select->add_option("--candidates", o.select_candidates, "Candidate sets to sample");
    select->add_option("--max-attempts", o.max_attempts, "Sampling attempts before giving up");
    select->add_option("--out", o.leaderboard_path, "Leaderboard CSV path");
    add_backend_options(select, o);
    add_run_options(select, o);
    add_prompt_options(select, o);
    add_config_option(select);
    select->callback([&] { rc = cmd_select_training(o); });

    auto* budget = app.add_subcommand("budget", "Estimate prompt tokens against model context lengths");
    budget->add_option("--scheme", o.scheme, "Builtin scheme name or scheme file");
    budget->add_option("--transcript", o.transcript_path, "Transcript file");
    budget->add_option("--exemplars", o.exemplars_dir, "Exemplar directory, or 'ideal'");
    add_run_options(budget, o, false);
    budget->add_option("--profile", o.profile, "Check a single profile instead of all");
    add_prompt_options(budget, o);
    add_config_option(budget);
    budget->callback([&] { rc = cmd_budget(o); });

    auto* schemes = app.add_subcommand("schemes", "List or show coding schemes");
    schemes->require_subcommand(1);
    auto* slist = schemes->add_subcommand("list", "List builtin schemes");
    slist->callback([&] { rc = cmd_schemes_list(); });
    auto* sshow = schemes->add_subcommand("show", "Show a scheme's codes");
    sshow->add_option("name", o.show_target, "Builtin name or scheme file")->required();
    sshow->callback([&] { rc = cmd_schemes_show(o); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const BackendError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFatal;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFatal;
    }
    return rc;
}
