#include <doctest.h>

#include <atomic>
#include <cstring>
#include <cstdio>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "pkgforge/gateway.h"
#include "pkgforge/util.h"
#include "support.h"

using namespace pkgforge;
using testsupport::TempDir;

namespace {

// Independent FNV-1a over an explicit byte vector.
std::string oracle_tag(const std::string& prompt, double temperature) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", temperature);
    std::vector<unsigned char> bytes(buf, buf + std::strlen(buf));
    bytes.push_back(0);
    bytes.insert(bytes.end(), prompt.begin(), prompt.end());
    std::uint64_t h = 14695981039346656037ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

struct StubServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> in_flight{0};
    std::atomic<int> peak{0};
    std::atomic<int> calls{0};

    StubServer() { server.new_task_queue = [] { return new httplib::ThreadPool(16); }; }
    void start() {
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~StubServer() {
        server.stop();
        if (thread.joinable()) thread.join();
    }
    std::string url(const std::string& path = "/v1/chat") const {
        return "http://127.0.0.1:" + std::to_string(port) + path;
    }
};

std::string chat_body(const std::string& content, const std::string& finish = "stop") {
    nlohmann::json j = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}},
                                      {"finish_reason", finish}}}}};
    return j.dump();
}

}  // namespace

TEST_CASE("request tag matches an independent FNV-1a") {
    CHECK(compute_request_tag("", 0.0) == oracle_tag("", 0.0));
    CHECK(compute_request_tag("hello", 0.2) == oracle_tag("hello", 0.2));
    CHECK(compute_request_tag("", 0.0).size() == 16);
    CHECK(compute_request_tag("p", 0.2) == compute_request_tag("p", 0.2));
    CHECK(compute_request_tag("p", 0.2) != compute_request_tag("p", 0.0));
}

TEST_CASE("single-byte perturbations never collide") {
    std::mt19937_64 rng(7);
    std::string base(200, 'a');
    for (auto& c : base) c = static_cast<char>('a' + rng() % 26);
    std::set<std::string> prompts{base};
    std::set<std::string> tags{compute_request_tag(base, 0.2)};
    for (int i = 0; i < 1000; ++i) {
        std::string p = base;
        const auto pos = rng() % p.size();
        char c;
        do {
            c = static_cast<char>(rng() % 256);
        } while (c == p[pos]);
        p[pos] = c;
        const auto tag = compute_request_tag(p, 0.2);
        CHECK(tag == oracle_tag(p, 0.2));
        prompts.insert(p);
        tags.insert(tag);
    }
    CHECK(prompts.size() > 900);
    CHECK(tags.size() == prompts.size());
}

TEST_CASE("backend config validation") {
    BackendConfig c;
    c.mode = BackendMode::Replay;
    CHECK_THROWS_AS(check_backend_config(c), GatewayError);
    c.fixtures_dir = "/tmp";
    CHECK_NOTHROW(check_backend_config(c));
    c.mode = BackendMode::Live;
    CHECK_THROWS_AS(check_backend_config(c), GatewayError);
    c.endpoint_url = "http://127.0.0.1:9/x";
    CHECK_NOTHROW(check_backend_config(c));
    c.max_in_flight = 0;
    CHECK_THROWS_AS(check_backend_config(c), GatewayError);
}

TEST_CASE("replay returns stored text and names missing tags") {
    TempDir dir;
    BackendConfig c;
    c.fixtures_dir = dir.path();
    const auto req = make_request("prompt text", 0.2, 100);
    write_fixture(dir.path(), req, "stored answer");
    const auto r = complete(req, c);
    CHECK(r.text == "stored answer");
    CHECK(r.backend == BackendMode::Replay);
    CHECK(complete(req, c).text == r.text);

    const auto missing = make_request("other prompt", 0.2, 100);
    try {
        complete(missing, c);
        FAIL("expected fixture-missing error");
    } catch (const GatewayError& e) {
        CHECK(e.kind() == GatewayErrorKind::FixtureMissing);
        CHECK(std::string(e.what()).find(missing.request_tag) != std::string::npos);
    }
}

TEST_CASE("live mode returns the stub body and records a fixture") {
    StubServer stub;
    std::string seen_body;
    std::string seen_auth;
    stub.server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
        seen_body = req.body;
        seen_auth = req.get_header_value("Authorization");
        res.set_content(chat_body("fixed reply"), "application/json");
    });
    stub.start();

    TempDir dir;
    ::setenv("PKGFORGE_TEST_TOKEN", "sekrit", 1);
    BackendConfig c;
    c.mode = BackendMode::Live;
    c.endpoint_url = stub.url();
    c.fixtures_dir = dir.path();
    c.auth_token_env_var = "PKGFORGE_TEST_TOKEN";
    const auto req = make_request("hello there", 0.2, 64);
    const auto r = complete(req, c);
    CHECK(r.text == "fixed reply");
    CHECK(r.backend == BackendMode::Live);
    CHECK(seen_auth == "Bearer sekrit");
    const auto sent = nlohmann::json::parse(seen_body);
    CHECK(sent["messages"][0]["role"] == "user");
    CHECK(sent["messages"][0]["content"] == "hello there");
    CHECK(sent["max_tokens"] == 64);
    REQUIRE(std::filesystem::exists(fixture_path(dir.path(), req.request_tag)));

    BackendConfig replay;
    replay.fixtures_dir = dir.path();
    CHECK(complete(req, replay).text == "fixed reply");
}

TEST_CASE("truncation flag follows finish_reason") {
    StubServer stub;
    stub.server.Post("/v1/chat", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(chat_body("partial", "length"), "application/json");
    });
    stub.start();
    BackendConfig c;
    c.mode = BackendMode::Live;
    c.endpoint_url = stub.url();
    CHECK(complete(make_request("x", 0.2, 4), c).truncated);
}

TEST_CASE("5xx responses are retried, 4xx are not") {
    StubServer stub;
    stub.server.Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
        if (stub.calls++ < 2) {
            res.status = 503;
            return;
        }
        res.set_content(chat_body("recovered"), "application/json");
    });
    std::atomic<int> bad_calls{0};
    stub.server.Post("/bad", [&](const httplib::Request&, httplib::Response& res) {
        ++bad_calls;
        res.status = 400;
    });
    stub.start();

    BackendConfig c;
    c.mode = BackendMode::Live;
    c.retry_backoff_ms = 10;
    c.max_retries = 3;
    c.endpoint_url = stub.url("/flaky");
    CHECK(complete(make_request("x", 0.2, 4), c).text == "recovered");
    CHECK(stub.calls == 3);

    c.endpoint_url = stub.url("/bad");
    CHECK_THROWS_AS(complete(make_request("x", 0.2, 4), c), GatewayError);
    CHECK(bad_calls == 1);

    stub.calls = -100;
    c.endpoint_url = stub.url("/flaky");
    c.max_retries = 1;
    try {
        complete(make_request("y", 0.2, 4), c);
        FAIL("expected exhaustion");
    } catch (const GatewayError& e) {
        CHECK(e.kind() == GatewayErrorKind::Http);
    }
}

TEST_CASE("transport failure after retries") {
    BackendConfig c;
    c.mode = BackendMode::Live;
    c.endpoint_url = "http://127.0.0.1:1/none";
    c.max_retries = 1;
    c.retry_backoff_ms = 5;
    c.timeout_ms = 500;
    try {
        complete(make_request("x", 0.2, 4), c);
        FAIL("expected transport error");
    } catch (const GatewayError& e) {
        CHECK((e.kind() == GatewayErrorKind::Transport || e.kind() == GatewayErrorKind::Timeout));
    }
}

TEST_CASE("in-flight requests never exceed max_in_flight") {
    StubServer stub;
    stub.server.Post("/slow", [&](const httplib::Request&, httplib::Response& res) {
        const int now = ++stub.in_flight;
        int prev = stub.peak.load();
        while (now > prev && !stub.peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        --stub.in_flight;
        res.set_content(chat_body("ok"), "application/json");
    });
    stub.start();

    BackendConfig c;
    c.mode = BackendMode::Live;
    c.endpoint_url = stub.url("/slow");
    c.max_in_flight = 3;
    LlmGateway gateway(c);
    std::vector<std::jthread> workers;
    for (int i = 0; i < 12; ++i) {
        workers.emplace_back([&, i] { gateway.complete(make_request("p" + std::to_string(i), 0.2, 4)); });
    }
    workers.clear();
    CHECK(stub.peak.load() <= 3);
    CHECK(stub.peak.load() >= 2);
}
