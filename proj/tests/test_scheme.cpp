#include <catch2/catch.hpp>

#include "convcode/io.hpp"
#include "convcode/rng.hpp"
#include "convcode/scheme.hpp"
#include "support/oracles.hpp"

using namespace convcode;

TEST_CASE("builtin jackel19 labels and order") {
    auto s = builtin_jackel19();
    REQUIRE(s.codes.size() == 19);
    const std::vector<std::string> expected = {
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
    for (size_t i = 0; i < expected.size(); ++i) {
        CHECK(s.codes[i].label == expected[i]);
    }
    CHECK(s.codes[10].label == "Accepting Offer");  // code 11, 1-based
    CHECK(s.has_other);
    CHECK(s.unit_of_analysis == UnitOfAnalysis::Sentence);
    CHECK(validate_scheme(s).empty());
}

TEST_CASE("builtin jackel19 carries its sample sentences") {
    auto s = builtin_jackel19();
    auto sentences_of = [&](const std::string& label) {
        std::vector<std::string> out;
        for (const auto& c : s.codes) {
            if (c.label == label) {
                for (const auto& e : c.example_sentences) out.push_back(e.sentence);
            }
        }
        return out;
    };
    CHECK(sentences_of("Asking positional information") ==
          std::vector<std::string>{"What is the maximum price you can pay for these materials?"});
    CHECK(sentences_of("Providing priority-related information") ==
          std::vector<std::string>{
              "We prioritize growth and expansion over maintaining a conservative business model."});
    CHECK(sentences_of("Single-issue activity") ==
          std::vector<std::string>{"Would you accept a payment of $5000 now and $5000 upon completion?"});
    CHECK(sentences_of("Substantiation") ==
          std::vector<std::string>{"We can't afford to overlook the potential consequences of this decision."});
    CHECK(sentences_of("Rejecting Offer") ==
          std::vector<std::string>{"I'm sorry, but this just isn't going to work for us."});
    CHECK(sentences_of("Accepting Offer") ==
          std::vector<std::string>{"That’s very generous of you. I accept."});
    CHECK(s.codes.back().label == "Other");
}

TEST_CASE("builtin jackel19 sub-descriptions live in definitions") {
    auto s = builtin_jackel19();
    CHECK(s.find("contentious_communication")->definition.find(
              "Stressing Power, Criticism, Threat, Hostility") != std::string::npos);
    CHECK(s.find("procedural_comments")->definition.find("Time management") != std::string::npos);
    CHECK(s.find("positive_statements")->definition.find("Positive affective reaction") !=
          std::string::npos);
}

TEST_CASE("golden scheme file matches the builtin") {
    auto path = std::filesystem::path(CONVCODE_SOURCE_DIR) / "schemes" / "jackel19.json";
    std::string golden = read_file(path);
    auto s = builtin_jackel19();
    CHECK(serialize_scheme(s) == golden);
    CHECK(load_scheme(golden) == s);
}

namespace {

CodingScheme tiny_scheme(size_t n_codes = 4) {
    CodingScheme s;
    s.scheme_id = "tiny";
    s.name = "Tiny scheme";
    for (size_t i = 0; i < n_codes; ++i) {
        std::string id = "c" + std::to_string(i);
        s.codes.push_back({id, "Code " + std::to_string(i), "Definition " + std::to_string(i), "", {}});
    }
    return s;
}

}  // namespace

TEST_CASE("scheme validation errors") {
    auto dup = tiny_scheme();
    dup.codes[1].code_id = dup.codes[0].code_id;
    CHECK_THROWS_WITH(validate_scheme(dup), Catch::Contains("duplicate"));

    auto empty_def = tiny_scheme();
    empty_def.codes[2].definition.clear();
    CHECK_THROWS_WITH(validate_scheme(empty_def), Catch::Contains("definition"));

    CHECK_THROWS_WITH(validate_scheme(tiny_scheme(26)), Catch::Contains("range"));
    CHECK_THROWS_WITH(validate_scheme(tiny_scheme(1)), Catch::Contains("range"));
    CHECK(validate_scheme(tiny_scheme(25)).size() == 1);  // warns, does not throw
    CHECK(validate_scheme(tiny_scheme(21)).size() == 1);
    CHECK(validate_scheme(tiny_scheme(20)).empty());

    auto bad_supp = tiny_scheme();
    bad_supp.supplements["nope"] = {"x"};
    CHECK_THROWS_WITH(validate_scheme(bad_supp), Catch::Contains("unknown code"));
}

TEST_CASE("load_scheme rejects duplicate ids from files") {
    std::string doc = R"({
      "scheme_id": "s", "name": "S", "unit_of_analysis": "sentence",
      "codes": [
        {"id": "offer_accept", "label": "A", "definition": "a"},
        {"id": "offer_accept", "label": "B", "definition": "b"}
      ]
    })";
    CHECK_THROWS_WITH(load_scheme(doc), Catch::Contains("duplicate"));
    CHECK_THROWS_WITH(load_scheme("{not json"), Catch::Contains("JSON"));
    CHECK_THROWS_WITH(load_scheme(R"({"scheme_id": "s"})"), Catch::Contains("field"));
}

TEST_CASE("scheme round trip on randomized schemes") {
    Rng rng(314);
    for (int it = 0; it < 25; ++it) {
        CodingScheme s;
        s.scheme_id = "rt" + std::to_string(it);
        s.name = "Round trip " + std::to_string(it);
        s.unit_of_analysis = it % 3 == 0 ? UnitOfAnalysis::SpeakingTurn : UnitOfAnalysis::Sentence;
        s.has_other = it % 2 == 0;
        size_t n = 2 + rng.bounded(10);
        for (size_t i = 0; i < n; ++i) {
            Code c;
            c.code_id = "k" + std::to_string(i);
            c.label = "Label, with \"quotes\" " + std::to_string(i);
            c.definition = "Def\nacross lines " + std::to_string(i);
            if (rng.bounded(2)) c.extra_instructions = "Watch for overlap with k0.";
            for (size_t e = rng.bounded(3); e > 0; --e) {
                c.example_sentences.push_back(
                    {"Example " + std::to_string(e),
                     rng.bounded(2) ? std::optional<std::string>("manual") : std::nullopt});
            }
            s.codes.push_back(std::move(c));
        }
        if (rng.bounded(2)) s.supplements["k0"] = {"Supplement one.", "Supplement two."};
        REQUIRE(load_scheme(serialize_scheme(s)) == s);
    }
}

TEST_CASE("code_frequencies basics") {
    auto s = builtin_jackel19();
    std::vector<CodedUnit> all_other;
    for (int i = 0; i < 10; ++i) all_other.push_back({"t", i, "other", "human"});
    auto freq = code_frequencies(all_other, s);
    CHECK(freq["other"] == 10);
    long long total = 0;
    for (const auto& [id, n] : freq) total += n;
    CHECK(total == 10);
    CHECK(freq["humor"] == 0);
    CHECK(freq.size() == 19);

    auto zeros = code_frequencies({}, s);
    for (const auto& [id, n] : zeros) CHECK(n == 0);

    CHECK_THROWS_WITH(code_frequencies({{"t", 0, "lying", "human"}}, s), Catch::Contains("unknown"));
}

TEST_CASE("code_frequencies matches a brute-force tally and is permutation-invariant") {
    auto s = tiny_scheme(6);
    Rng rng(500);
    std::vector<CodedUnit> units;
    std::vector<std::string> raw;
    for (int i = 0; i < 50; ++i) {
        std::string code = "c" + std::to_string(rng.bounded(6));
        units.push_back({"t", i, code, "human"});
        raw.push_back(code);
    }
    auto freq = code_frequencies(units, s);
    auto expected = oracle::tally(raw);
    for (const auto& [code, n] : expected) CHECK(freq.at(code) == n);

    auto shuffled = units;
    rng.shuffle(shuffled);
    CHECK(code_frequencies(shuffled, s) == freq);
}

namespace {

CodedTranscript coded_fixture(const CodingScheme& s, const std::map<std::string, int>& counts) {
    CodedTranscript ct;
    ct.transcript.transcript_id = "fix";
    int idx = 0;
    std::string body;
    for (const auto& [code, n] : counts) {
        for (int i = 0; i < n; ++i) {
            body += "Unit " + std::to_string(idx) + " text here. ";
            ct.annotations.push_back({"fix", idx, code, "human"});
            ++idx;
        }
    }
    ct.transcript.turns.push_back({0, "A", body.empty() ? "Placeholder." : body});
    resplit_sentences(ct.transcript);
    (void)s;
    return ct;
}

}  // namespace

TEST_CASE("find_underrepresented reports deficits") {
    auto s = tiny_scheme(3);
    SECTION("3 natural, no supplements, floor 15") {
        auto ex = ExemplarSet::from_coded({coded_fixture(s, {{"c0", 3}, {"c1", 15}, {"c2", 20}})}, s);
        auto deficits = find_underrepresented(ex, s, 15);
        REQUIRE(deficits.size() == 1);
        CHECK(deficits[0].code_id == "c0");
        CHECK(deficits[0].natural == 3);
        CHECK(deficits[0].supplement == 0);
        CHECK(deficits[0].deficit == 12);
    }
    SECTION("supplements count toward the floor") {
        auto with_supp = s;
        with_supp.supplements["c0"] = std::vector<std::string>(5, "Synthetic sentence.");
        auto ex = ExemplarSet::from_coded({coded_fixture(with_supp, {{"c0", 10}, {"c1", 15}, {"c2", 15}})},
                                          with_supp);
        CHECK(find_underrepresented(ex, with_supp, 15).empty());
    }
    SECTION("exactly at floor is fine") {
        auto ex = ExemplarSet::from_coded({coded_fixture(s, {{"c0", 15}, {"c1", 15}, {"c2", 15}})}, s);
        CHECK(find_underrepresented(ex, s, 15).empty());
    }
    SECTION("ideal mode is rejected") {
        auto ex = ExemplarSet::from_ideal(s);
        CHECK_THROWS_AS(find_underrepresented(ex, s, 15), std::invalid_argument);
    }
}

TEST_CASE("exemplar transcript cap") {
    auto s = tiny_scheme(2);
    std::vector<CodedTranscript> six;
    for (int i = 0; i < 6; ++i) six.push_back(coded_fixture(s, {{"c0", 1}, {"c1", 1}}));
    CHECK_THROWS_WITH(ExemplarSet::from_coded(six, s), Catch::Contains("1 to 5"));
    CHECK_THROWS_WITH(ExemplarSet::from_coded({}, s), Catch::Contains("1 to 5"));
}

TEST_CASE("annotations round trip") {
    std::vector<CodedUnit> units = {
        {"t1", 0, "c0", "human"},
        {"t1", 1, "c1", "alice"},
    };
    auto loaded = load_annotations(serialize_annotations(units));
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].transcript_id == "t1");
    CHECK(loaded[0].unit_index == 0);
    CHECK(loaded[1].coder_id == "alice");

    CHECK_THROWS_WITH(load_annotations("wrong,header\n"), Catch::Contains("header"));
    auto s = tiny_scheme(2);
    CHECK_THROWS_WITH(load_annotations("transcript_id,unit_index,code_id,coder_id\nt,0,zzz,h\n", &s),
                      Catch::Contains("unknown"));
}

TEST_CASE("exemplar directory loading") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "convcode_test_exemplars";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_file(dir / "ex1.txt", "A: Offer accepted. Thank you.\nB: Great.\n");
    write_file(dir / "ex1.codes.csv",
               "transcript_id,unit_index,code_id,coder_id\nex1,0,c0,h\nex1,1,c1,h\nex1,2,c1,h\n");
    auto s = tiny_scheme(2);
    auto ex = load_exemplar_dir(dir, s);
    CHECK(ex.mode == ExemplarMode::CodedTranscripts);
    REQUIRE(ex.transcripts.size() == 1);
    CHECK(ex.transcripts[0].transcript.transcript_id == "ex1");
    CHECK(ex.transcripts[0].annotations.size() == 3);

    SECTION("missing codes file") {
        write_file(dir / "ex2.txt", "A: Hello.\n");
        CHECK_THROWS_WITH(load_exemplar_dir(dir, s), Catch::Contains("no matching"));
    }
    SECTION("ideal sentences file switches mode") {
        write_file(dir / "ideal_sentences.json", R"({"c0": ["One."], "c1": ["Two.", "Three."]})");
        auto ideal = load_exemplar_dir(dir, s);
        CHECK(ideal.mode == ExemplarMode::IdealSentences);
        CHECK(ideal.ideal_sentences.at("c1").size() == 2);
    }
    fs::remove_all(dir);
}
