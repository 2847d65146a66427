#include <catch2/catch.hpp>

#include <atomic>
#include <thread>

#include "convcode/backend.hpp"

using namespace convcode;

namespace {

MockScript fixed_block_script() {
    MockScript s;
    s.kind = MockScript::Kind::Static;
    MockEntry e;
    e.segment = 0;
    e.texts = {"1 | Hello. | Other\n2 | I accept. | Accepting Offer\n"};
    s.entries.push_back(e);
    return s;
}

CompletionRequest req_for(int segment, int run, const std::string& prompt = "p") {
    CompletionRequest r;
    r.prompt = prompt;
    r.run_tag = {segment, run};
    return r;
}

}  // namespace

TEST_CASE("mock replays a fixed block for every run of a segment") {
    MockBackend mock(fixed_block_script(), 1);
    for (int run = 0; run < 5; ++run) {
        auto res = mock.complete(req_for(0, run));
        CHECK(res.text == "1 | Hello. | Other\n2 | I accept. | Accepting Offer\n");
        CHECK(res.backend_name == "mock");
    }
    CHECK(mock.complete(req_for(9, 0)).text.empty());  // unmatched segment, no default
}

TEST_CASE("mock selection priority: segment+run over segment over hash over default") {
    MockScript s;
    s.kind = MockScript::Kind::Static;
    s.default_text = "default";
    MockEntry by_hash;
    by_hash.prompt_hash = text::fnv1a64_hex("the prompt");
    by_hash.texts = {"by hash"};
    MockEntry by_segment;
    by_segment.segment = 2;
    by_segment.texts = {"by segment"};
    MockEntry exact;
    exact.segment = 2;
    exact.run = 1;
    exact.texts = {"segment 2 run 1"};
    s.entries = {by_hash, by_segment, exact};
    MockBackend mock(s, 0);
    CHECK(mock.complete(req_for(2, 1, "the prompt")).text == "segment 2 run 1");
    CHECK(mock.complete(req_for(2, 0, "the prompt")).text == "by segment");
    CHECK(mock.complete(req_for(5, 0, "the prompt")).text == "by hash");
    CHECK(mock.complete(req_for(5, 0, "another prompt")).text == "default");
}

TEST_CASE("mock determinism across identical configurations") {
    auto script = fixed_block_script();
    MockEntry variants;
    variants.segment = 1;
    variants.texts = {"variant a", "variant b", "variant c"};
    script.entries.push_back(variants);
    MockBackend m1(script, 42), m2(script, 42);
    for (int run = 0; run < 5; ++run) {
        CHECK(m1.complete(req_for(1, run)).text == m2.complete(req_for(1, run)).text);
    }
}

TEST_CASE("scripted failures raise distinct error kinds") {
    MockScript s;
    MockEntry fail;
    fail.segment = 0;
    fail.fail = "rate_limit";
    s.entries.push_back(fail);
    MockBackend mock(s, 0);
    try {
        mock.complete(req_for(0, 3));
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendErrorKind::RateLimit);
        CHECK(e.run_tag().segment_index == 0);
        CHECK(e.run_tag().run_index == 3);
        CHECK(std::string(e.what()).find("segment 0") != std::string::npos);
    }
}

TEST_CASE("noisy script generation is deterministic and honors fractions") {
    SegmentGroundTruth truth;
    truth.segment_index = 0;
    for (int i = 0; i < 200; ++i) {
        truth.lines.push_back({i % 2 ? "Seller" : "Buyer",
                               "We can't accept clause " + std::to_string(i) + " as written.",
                               i % 3 ? "Rejecting Offer" : "Substantiation"});
    }
    NoiseSpec noise;
    noise.skip_fraction = 0.05;
    noise.rewrite_fraction = 0.10;
    noise.flip_fraction = 0.02;
    noise.flip_labels = {"Other", "Humor", "Accepting Offer"};

    auto a = script_run(truth, noise, 42, 1);
    auto b = script_run(truth, noise, 42, 1);
    CHECK(a.response_text == b.response_text);
    auto c = script_run(truth, noise, 42, 2);
    CHECK(a.response_text != c.response_text);

    int skipped = 0, rewritten = 0, flipped = 0;
    for (const auto& line : a.lines) {
        switch (line.fate) {
            case LineFate::Skipped: ++skipped; break;
            case LineFate::Rewritten: ++rewritten; break;
            case LineFate::Flipped:
            case LineFate::RewrittenFlipped: ++flipped; break;
            case LineFate::Verbatim: break;
        }
        if (line.fate == LineFate::Rewritten || line.fate == LineFate::RewrittenFlipped) {
            CHECK(text::similarity(line.emitted_sentence,
                                   truth.lines[static_cast<size_t>(line.number - 1)].sentence) >= 0.85);
            CHECK(line.emitted_sentence != truth.lines[static_cast<size_t>(line.number - 1)].sentence);
        }
        if (line.fate != LineFate::Skipped) {
            CHECK(a.response_text.find(std::to_string(line.number) + " | " + line.emitted_sentence +
                                       " | " + line.emitted_code) != std::string::npos);
        }
    }
    // Loose binomial bounds around 5% / 10% / 2% of 200 lines.
    CHECK(skipped >= 2);
    CHECK(skipped <= 25);
    CHECK(rewritten >= 6);
    CHECK(rewritten <= 40);
    CHECK(flipped <= 15);
}

TEST_CASE("noisy script round-trips through JSON") {
    MockScript s;
    s.kind = MockScript::Kind::Noisy;
    s.noise.skip_fraction = 0.05;
    s.noise.rewrite_fraction = 0.1;
    s.noise.flip_labels = {"Other"};
    s.segments.push_back({0, {{"Buyer", "I can't do that.", "Rejecting Offer"}}});
    auto parsed = parse_mock_script(serialize_mock_script(s));
    CHECK(parsed.kind == MockScript::Kind::Noisy);
    CHECK(parsed.noise.skip_fraction == 0.05);
    REQUIRE(parsed.segments.size() == 1);
    CHECK(parsed.segments[0].lines[0].sentence == "I can't do that.");

    MockBackend m1(s, 7), m2(parsed, 7);
    CHECK(m1.complete(req_for(0, 0)).text == m2.complete(req_for(0, 0)).text);
}

TEST_CASE("batch preserves request order") {
    MockScript script;
    for (int seg = 0; seg < 5; ++seg) {
        MockEntry e;
        e.segment = seg;
        e.texts = {"answer " + std::to_string(seg)};
        script.entries.push_back(e);
    }
    MockBackend mock(script, 3);
    std::vector<CompletionRequest> reqs;
    for (int i = 0; i < 5; ++i) reqs.push_back(req_for(i, 0));
    auto outcomes = complete_batch(mock, reqs, 5);
    REQUIRE(outcomes.size() == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(outcomes[static_cast<size_t>(i)].ok);
        CHECK(outcomes[static_cast<size_t>(i)].response.text == "answer " + std::to_string(i));
    }
}

TEST_CASE("batch reports partial failures without aborting") {
    MockScript s;
    for (int seg = 0; seg < 10; ++seg) {
        MockEntry e;
        e.segment = seg;
        if (seg == 4) {
            e.fail = "transport";
        } else {
            e.texts = {"ok " + std::to_string(seg)};
        }
        s.entries.push_back(e);
    }
    MockBackend mock(s, 0);
    std::vector<CompletionRequest> reqs;
    for (int i = 0; i < 10; ++i) reqs.push_back(req_for(i, 0));
    auto outcomes = complete_batch(mock, reqs, 4);
    int ok = 0;
    for (const auto& o : outcomes) ok += o.ok ? 1 : 0;
    CHECK(ok == 9);
    CHECK_FALSE(outcomes[4].ok);
    CHECK(outcomes[4].error_kind == BackendErrorKind::Transport);
    CHECK(outcomes[4].run_tag.segment_index == 4);
}

TEST_CASE("serial and concurrent batches agree, including under jitter") {
    MockScript s;
    s.jitter_ms = 3;
    for (int seg = 0; seg < 8; ++seg) {
        MockEntry e;
        e.segment = seg;
        e.texts = {"a" + std::to_string(seg), "b" + std::to_string(seg)};
        s.entries.push_back(e);
    }
    MockBackend mock(s, 11);
    std::vector<CompletionRequest> reqs;
    for (int i = 0; i < 8; ++i) reqs.push_back(req_for(i, i % 3));
    auto serial = complete_batch(mock, reqs, 1);
    auto parallel = complete_batch(mock, reqs, 8);
    REQUIRE(serial.size() == parallel.size());
    for (size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].response.text == parallel[i].response.text);
    }
}

TEST_CASE("batch validates max_in_flight") {
    MockBackend mock(MockScript{}, 0);
    CHECK_THROWS_AS(complete_batch(mock, {}, 0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// HTTP backend against a local server.
// ---------------------------------------------------------------------------

namespace {

struct TestServer {
    httplib::Server server;
    int port = 0;
    std::thread thread;

    explicit TestServer(httplib::Server::Handler handler) {
        server.Post("/v1/complete", std::move(handler));
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~TestServer() {
        server.stop();
        thread.join();
    }

    BackendConfig config() const {
        BackendConfig cfg;
        cfg.kind = BackendKind::Http;
        cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/complete";
        cfg.model_id = "test-model";
        cfg.max_retries = 3;
        cfg.retry_backoff_ms = 1;
        cfg.timeout_ms = 2000;
        return cfg;
    }
};

}  // namespace

TEST_CASE("http backend extracts text via the configured JSON path") {
    std::atomic<int> hits{0};
    TestServer ts([&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        auto j = nlohmann::json::parse(req.body);
        CHECK(j["model"] == "test-model");
        CHECK(j["prompt"] == "code this");
        CHECK(j["temperature"] == Approx(0.2));
        nlohmann::json out = {{"choices", {{{"message", {{"content", "1 | Hi. | Other"}}}}}}};
        res.set_content(out.dump(), "application/json");
    });
    auto cfg = ts.config();
    cfg.response_text_path = "choices.0.message.content";
    CompletionRequest req;
    req.prompt = "code this";
    auto res = complete(req, cfg);
    CHECK(res.text == "1 | Hi. | Other");
    CHECK(res.backend_name == "http:test-model");
    CHECK(hits == 1);
}

TEST_CASE("http backend sends messages-style bodies when configured") {
    TestServer ts([&](const httplib::Request& req, httplib::Response& res) {
        auto j = nlohmann::json::parse(req.body);
        CHECK(j.contains("messages"));
        CHECK(j["messages"][0]["role"] == "user");
        CHECK(j["messages"][0]["content"] == "hello");
        res.set_content(R"({"completion": "ok"})", "application/json");
    });
    auto cfg = ts.config();
    cfg.request_style = "messages";
    CompletionRequest req;
    req.prompt = "hello";
    CHECK(complete(req, cfg).text == "ok");
}

TEST_CASE("http backend retries transient failures then succeeds") {
    std::atomic<int> hits{0};
    TestServer ts([&](const httplib::Request&, httplib::Response& res) {
        int n = ++hits;
        if (n < 3) {
            res.status = 500;
            return;
        }
        res.set_content(R"({"completion": "recovered"})", "application/json");
    });
    CompletionRequest req;
    req.prompt = "p";
    auto res = complete(req, ts.config());
    CHECK(res.text == "recovered");
    CHECK(hits == 3);
}

TEST_CASE("http backend never retries auth failures") {
    std::atomic<int> hits{0};
    TestServer ts([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 401;
    });
    CompletionRequest req;
    req.prompt = "p";
    req.run_tag = {1, 2};
    try {
        complete(req, ts.config());
        FAIL("expected auth error");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendErrorKind::Auth);
        CHECK(e.attempts() == 1);
        CHECK(e.run_tag().run_index == 2);
    }
    CHECK(hits == 1);
}

TEST_CASE("http backend reports rate-limit exhaustion") {
    std::atomic<int> hits{0};
    TestServer ts([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 429;
    });
    CompletionRequest req;
    req.prompt = "p";
    try {
        complete(req, ts.config());
        FAIL("expected rate-limit error");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendErrorKind::RateLimit);
        CHECK(e.attempts() == 3);
    }
    CHECK(hits == 3);
}

TEST_CASE("unreachable endpoint is a transport error after max_retries attempts") {
    BackendConfig cfg;
    cfg.kind = BackendKind::Http;
    cfg.endpoint_url = "http://127.0.0.1:1/v1/complete";  // nothing listens here
    cfg.model_id = "m";
    cfg.max_retries = 3;
    cfg.retry_backoff_ms = 1;
    cfg.timeout_ms = 200;
    CompletionRequest req;
    req.prompt = "p";
    try {
        complete(req, cfg);
        FAIL("expected transport error");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendErrorKind::Transport);
        CHECK(e.attempts() == 3);
    }
}

TEST_CASE("bearer token comes from the named environment variable") {
    std::string seen_auth;
    TestServer ts([&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        res.set_content(R"({"completion": "ok"})", "application/json");
    });
    auto cfg = ts.config();
    cfg.auth_token_env_var = "CONVCODE_TEST_TOKEN";
    setenv("CONVCODE_TEST_TOKEN", "sekrit", 1);
    CompletionRequest req;
    req.prompt = "p";
    CHECK(complete(req, cfg).text == "ok");
    CHECK(seen_auth == "Bearer sekrit");

    unsetenv("CONVCODE_TEST_TOKEN");
    CHECK_THROWS_AS(complete(req, cfg), BackendError);
}

TEST_CASE("protocol errors: bad JSON or missing path") {
    TestServer ts([&](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json at all", "application/json");
    });
    CompletionRequest req;
    req.prompt = "p";
    try {
        complete(req, ts.config());
        FAIL("expected protocol error");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendErrorKind::Protocol);
    }
}

TEST_CASE("http config validation") {
    BackendConfig cfg;
    cfg.kind = BackendKind::Http;
    CHECK_THROWS_AS(make_backend(cfg), BackendError);
    cfg.endpoint_url = "127.0.0.1/no-scheme";
    cfg.model_id = "m";
    CHECK_THROWS(make_backend(cfg));
}
