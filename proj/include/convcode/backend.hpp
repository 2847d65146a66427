// Copyright 2026 The convcode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "convcode/mock_script.hpp"
#include "convcode/rng.hpp"
#include "convcode/text.hpp"

namespace convcode {

/// Identifies one model call for logging and error reports.
struct RunTag {
    int segment_index = 0;
    int run_index = 0;

    std::string str() const {
        return "segment " + std::to_string(segment_index) + ", run " + std::to_string(run_index + 1);
    }
};

struct CompletionRequest {
    std::string prompt;
    double temperature = 0.2;
    int max_output_tokens = 4096;
    RunTag run_tag;
};

struct CompletionResponse {
    std::string text;  // may be empty; callers record that as a failed run
    long long latency_ms = 0;
    std::string backend_name;
};

enum class BackendErrorKind { Transport, Auth, RateLimit, Timeout, Protocol, Config };

inline const char* to_string(BackendErrorKind k) {
    switch (k) {
        case BackendErrorKind::Transport: return "transport";
        case BackendErrorKind::Auth: return "auth";
        case BackendErrorKind::RateLimit: return "rate_limit";
        case BackendErrorKind::Timeout: return "timeout";
        case BackendErrorKind::Protocol: return "protocol";
        case BackendErrorKind::Config: return "config";
    }
    return "?";
}

class BackendError : public std::runtime_error {
public:
    BackendError(BackendErrorKind kind, RunTag tag, const std::string& message, int attempts = 1)
        : std::runtime_error(std::string(to_string(kind)) + " error (" + tag.str() + ", " +
                             std::to_string(attempts) + " attempt" + (attempts == 1 ? "" : "s") +
                             "): " + message),
          kind_(kind),
          tag_(tag),
          attempts_(attempts) {}

    BackendErrorKind kind() const { return kind_; }
    RunTag run_tag() const { return tag_; }
    int attempts() const { return attempts_; }

private:
    BackendErrorKind kind_;
    RunTag tag_;
    int attempts_;
};

enum class BackendKind { Http, Mock };

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;

    // http
    std::string endpoint_url;              // e.g. http://host:1234/v1/complete
    std::string model_id;
    std::string auth_token_env_var;        // name of the env var holding the bearer token
    int timeout_ms = 30000;
    int max_retries = 3;                   // total attempts for transient failures
    int retry_backoff_ms = 250;            // doubles per retry
    std::string request_style = "prompt";  // "prompt" or "messages"
    std::string response_text_path = "completion";  // dot path into the response JSON

    // mock
    std::string mock_script_path;
    std::uint64_t mock_seed = 0;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResponse complete(const CompletionRequest& req) = 0;
    virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// Mock backend: replays a script, fully deterministic in
// (script, seed, prompt, run tag). Safe for concurrent use.
// ---------------------------------------------------------------------------

class MockBackend : public Backend {
public:
    MockBackend(MockScript script, std::uint64_t seed) : script_(std::move(script)), seed_(seed) {}

    std::string name() const override { return "mock"; }

    CompletionResponse complete(const CompletionRequest& req) override {
        if (!std::isfinite(req.temperature) || req.temperature < 0) {
            throw BackendError(BackendErrorKind::Config, req.run_tag,
                               "temperature must be finite and >= 0");
        }
        auto started = std::chrono::steady_clock::now();
        if (script_.jitter_ms > 0) {
            Rng rng(mix_seed(seed_ ^ 0x6a177e5u, static_cast<std::uint64_t>(req.run_tag.segment_index),
                             static_cast<std::uint64_t>(req.run_tag.run_index)));
            std::this_thread::sleep_for(
                std::chrono::milliseconds(rng.bounded(static_cast<std::uint64_t>(script_.jitter_ms) + 1)));
        }
        std::string body = resolve(req);
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - started)
                           .count();
        return {std::move(body), elapsed, name()};
    }

private:
    std::string resolve(const CompletionRequest& req) const {
        if (script_.kind == MockScript::Kind::Noisy) {
            const SegmentGroundTruth* truth = script_.find_segment(req.run_tag.segment_index);
            if (!truth) return script_.default_text.value_or("");
            return script_run(*truth, script_.noise, seed_, req.run_tag.run_index).response_text;
        }
        std::string hash = text::fnv1a64_hex(req.prompt);
        const MockEntry* best = nullptr;
        int best_rank = -1;
        for (const auto& e : script_.entries) {
            int rank = -1;
            if (e.segment && *e.segment == req.run_tag.segment_index) {
                rank = e.run ? (*e.run == req.run_tag.run_index ? 4 : -1) : 3;
            } else if (e.prompt_hash && *e.prompt_hash == hash) {
                rank = e.run ? (*e.run == req.run_tag.run_index ? 2 : -1) : 1;
            }
            if (rank > best_rank) {
                best = &e;
                best_rank = rank;
            }
        }
        if (!best) return script_.default_text.value_or("");
        if (best->fail) {
            BackendErrorKind kind = BackendErrorKind::Transport;
            if (*best->fail == "auth") kind = BackendErrorKind::Auth;
            else if (*best->fail == "rate_limit") kind = BackendErrorKind::RateLimit;
            else if (*best->fail == "timeout") kind = BackendErrorKind::Timeout;
            throw BackendError(kind, req.run_tag, "scripted failure");
        }
        if (best->texts.empty()) return "";
        if (best->texts.size() == 1) return best->texts[0];
        std::uint64_t pick = mix_seed(seed_, text::fnv1a64(req.prompt),
                                      static_cast<std::uint64_t>(req.run_tag.run_index)) %
                             best->texts.size();
        return best->texts[pick];
    }

    MockScript script_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// HTTP backend: single JSON POST per completion with bearer auth, bounded
// retries with exponential backoff on transient failures. Auth failures are
// never retried.
// ---------------------------------------------------------------------------

namespace detail {

struct ParsedUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // /v1/...
};

inline ParsedUrl parse_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::runtime_error("backend: endpoint_url needs a scheme: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline const nlohmann::json* resolve_json_path(const nlohmann::json& root, const std::string& dot_path) {
    const nlohmann::json* at = &root;
    size_t pos = 0;
    while (pos <= dot_path.size()) {
        size_t dot = dot_path.find('.', pos);
        std::string part = dot_path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (part.empty()) return nullptr;
        bool numeric = part.find_first_not_of("0123456789") == std::string::npos;
        if (numeric && at->is_array()) {
            size_t idx = static_cast<size_t>(std::stoull(part));
            if (idx >= at->size()) return nullptr;
            at = &(*at)[idx];
        } else if (at->is_object() && at->contains(part)) {
            at = &(*at)[part];
        } else {
            return nullptr;
        }
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    return at;
}

}  // namespace detail

class HttpBackend : public Backend {
public:
    explicit HttpBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.endpoint_url.empty() || cfg_.model_id.empty()) {
            throw BackendError(BackendErrorKind::Config, {},
                               "http backend requires endpoint_url and model_id");
        }
        url_ = detail::parse_url(cfg_.endpoint_url);
        if (!cfg_.auth_token_env_var.empty()) {
            const char* tok = std::getenv(cfg_.auth_token_env_var.c_str());
            if (!tok || !*tok) {
                throw BackendError(BackendErrorKind::Auth, {},
                                   "environment variable " + cfg_.auth_token_env_var +
                                       " is not set (auth token)");
            }
            token_ = tok;
        }
    }

    std::string name() const override { return "http:" + cfg_.model_id; }

    CompletionResponse complete(const CompletionRequest& req) override {
        if (!std::isfinite(req.temperature) || req.temperature < 0) {
            throw BackendError(BackendErrorKind::Config, req.run_tag, "temperature must be finite and >= 0");
        }
        std::string body = build_body(req);
        auto started = std::chrono::steady_clock::now();
        int attempts = std::max(1, cfg_.max_retries);
        std::string last_error;
        BackendErrorKind last_kind = BackendErrorKind::Transport;
        for (int attempt = 0; attempt < attempts; ++attempt) {
            if (attempt > 0) {
                long long backoff = static_cast<long long>(cfg_.retry_backoff_ms) * (1LL << (attempt - 1));
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            }
            httplib::Client client(url_.base);
            client.set_connection_timeout(std::chrono::milliseconds(cfg_.timeout_ms));
            client.set_read_timeout(std::chrono::milliseconds(cfg_.timeout_ms));
            httplib::Headers headers;
            if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
            auto res = client.Post(url_.path, headers, body, "application/json");
            if (!res) {
                bool timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                                 res.error() == httplib::Error::Read;
                last_kind = timed_out ? BackendErrorKind::Timeout : BackendErrorKind::Transport;
                last_error = httplib::to_string(res.error());
                continue;
            }
            if (res->status == 401 || res->status == 403) {
                throw BackendError(BackendErrorKind::Auth, req.run_tag,
                                   "HTTP " + std::to_string(res->status), attempt + 1);
            }
            if (res->status == 429) {
                last_kind = BackendErrorKind::RateLimit;
                last_error = "HTTP 429";
                continue;
            }
            if (res->status >= 500 || res->status == 408) {
                last_kind = BackendErrorKind::Transport;
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                throw BackendError(BackendErrorKind::Protocol, req.run_tag,
                                   "HTTP " + std::to_string(res->status) + ": " + res->body, attempt + 1);
            }
            auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - started)
                               .count();
            return {extract_text(res->body, req.run_tag, attempt + 1), elapsed, name()};
        }
        throw BackendError(last_kind, req.run_tag, last_error, attempts);
    }

private:
    std::string build_body(const CompletionRequest& req) const {
        nlohmann::json j;
        j["model"] = cfg_.model_id;
        if (cfg_.request_style == "messages") {
            j["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}});
        } else {
            j["prompt"] = req.prompt;
        }
        j["temperature"] = req.temperature;
        j["max_tokens"] = req.max_output_tokens;
        return j.dump();
    }

    std::string extract_text(const std::string& body, RunTag tag, int attempts) const {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(BackendErrorKind::Protocol, tag,
                               std::string("response is not JSON: ") + e.what(), attempts);
        }
        const nlohmann::json* node = detail::resolve_json_path(j, cfg_.response_text_path);
        if (!node || !node->is_string()) {
            throw BackendError(BackendErrorKind::Protocol, tag,
                               "response_text_path '" + cfg_.response_text_path +
                                   "' not found or not a string",
                               attempts);
        }
        return node->get<std::string>();
    }

    BackendConfig cfg_;
    detail::ParsedUrl url_;
    std::string token_;
};

inline std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
    if (cfg.kind == BackendKind::Http) return std::make_unique<HttpBackend>(cfg);
    MockScript script;
    if (!cfg.mock_script_path.empty()) {
        std::ifstream in(cfg.mock_script_path, std::ios::binary);
        if (!in) {
            throw BackendError(BackendErrorKind::Config, {},
                               "cannot open mock script: " + cfg.mock_script_path);
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        script = parse_mock_script(ss.str());
    }
    return std::make_unique<MockBackend>(std::move(script), cfg.mock_seed);
}

/// One-shot completion per the configured backend.
inline CompletionResponse complete(const CompletionRequest& req, const BackendConfig& cfg) {
    return make_backend(cfg)->complete(req);
}

struct CompletionOutcome {
    bool ok = false;
    CompletionResponse response;
    BackendErrorKind error_kind = BackendErrorKind::Transport;
    std::string error_message;
    RunTag run_tag;
};

/// Fan requests out over at most max_in_flight worker threads. Outcomes come
/// back in request order regardless of completion order; failures are
/// reported per element and never abort the batch.
inline std::vector<CompletionOutcome> complete_batch(Backend& backend,
                                                     const std::vector<CompletionRequest>& requests,
                                                     int max_in_flight) {
    if (max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
    std::vector<CompletionOutcome> outcomes(requests.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= requests.size()) break;
            CompletionOutcome& out = outcomes[i];
            out.run_tag = requests[i].run_tag;
            try {
                out.response = backend.complete(requests[i]);
                out.ok = true;
            } catch (const BackendError& e) {
                out.error_kind = e.kind();
                out.error_message = e.what();
            } catch (const std::exception& e) {
                out.error_kind = BackendErrorKind::Transport;
                out.error_message = e.what();
            }
        }
    };
    size_t n_threads = std::min<size_t>(static_cast<size_t>(max_in_flight), requests.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return outcomes;
}

inline std::vector<CompletionOutcome> complete_batch(const std::vector<CompletionRequest>& requests,
                                                     const BackendConfig& cfg, int max_in_flight) {
    auto backend = make_backend(cfg);
    return complete_batch(*backend, requests, max_in_flight);
}

}  // namespace convcode
