#include "pkgforge/gateway.h"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "pkgforge/util.h"

namespace pkgforge {

using json = nlohmann::json;

namespace {

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path;
};

ParsedUrl parse_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(url, m, re)) {
        throw GatewayError(GatewayErrorKind::Config, "malformed endpoint_url: " + url);
    }
    return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

std::string format_temperature(double t) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", t);
    return buf;
}

// Extracts the first message content string from a chat-completion body.
std::pair<std::string, bool> read_completion_body(const std::string& body) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& e) {
        throw GatewayError(GatewayErrorKind::Protocol, std::string("response is not JSON: ") + e.what());
    }
    bool truncated = false;
    if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
        const auto& choice = doc["choices"][0];
        if (choice.contains("finish_reason") && choice["finish_reason"] == "length") truncated = true;
        if (choice.contains("message") && choice["message"].contains("content") &&
            choice["message"]["content"].is_string()) {
            return {choice["message"]["content"].get<std::string>(), truncated};
        }
        if (choice.contains("text") && choice["text"].is_string()) {
            return {choice["text"].get<std::string>(), truncated};
        }
    }
    if (doc.contains("message") && doc["message"].contains("content") && doc["message"]["content"].is_string()) {
        return {doc["message"]["content"].get<std::string>(), truncated};
    }
    throw GatewayError(GatewayErrorKind::Protocol, "response carries no message content");
}

}  // namespace

void check_backend_config(const BackendConfig& config) {
    if (config.max_in_flight < 1) throw GatewayError(GatewayErrorKind::Config, "max_in_flight must be >= 1");
    if (config.max_retries < 0) throw GatewayError(GatewayErrorKind::Config, "max_retries must be >= 0");
    if (config.timeout_ms < 1) throw GatewayError(GatewayErrorKind::Config, "timeout_ms must be >= 1");
    if (config.mode == BackendMode::Live) {
        if (config.endpoint_url.empty()) {
            throw GatewayError(GatewayErrorKind::Config, "live mode requires endpoint_url");
        }
        parse_url(config.endpoint_url);
    } else if (config.fixtures_dir.empty()) {
        throw GatewayError(GatewayErrorKind::Config, "replay mode requires fixtures_dir");
    }
}

std::string compute_request_tag(std::string_view prompt_text, double temperature) {
    const std::string t = format_temperature(temperature);
    std::uint64_t h = fnv1a64(t);
    h = fnv1a64(std::string_view("\0", 1), h);
    h = fnv1a64(prompt_text, h);
    return to_hex64(h);
}

LlmRequest make_request(std::string prompt, double temperature, int max_output_tokens) {
    LlmRequest r;
    r.request_tag = compute_request_tag(prompt, temperature);
    r.prompt = std::move(prompt);
    r.temperature = temperature;
    r.max_output_tokens = max_output_tokens;
    return r;
}

std::filesystem::path fixture_path(const std::filesystem::path& fixtures_dir, std::string_view request_tag) {
    return fixtures_dir / (std::string(request_tag) + ".json");
}

void write_fixture(const std::filesystem::path& fixtures_dir, const LlmRequest& request, std::string_view response_text,
                   bool truncated) {
    json doc = {
        {"request_tag", request.request_tag},
        {"temperature", request.temperature},
        {"max_output_tokens", request.max_output_tokens},
        {"prompt", request.prompt},
        {"response", std::string(response_text)},
        {"truncated", truncated},
    };
    write_file_atomic(fixture_path(fixtures_dir, request.request_tag), doc.dump(2) + "\n");
}

LlmGateway::LlmGateway(BackendConfig config) : config_(std::move(config)) {
    check_backend_config(config_);
}

void LlmGateway::acquire_slot() {
    std::unique_lock lock(slot_mutex_);
    slot_cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
    ++in_flight_;
}

void LlmGateway::release_slot() {
    {
        std::lock_guard lock(slot_mutex_);
        --in_flight_;
    }
    slot_cv_.notify_one();
}

LlmResponse LlmGateway::complete(const LlmRequest& request) {
    if (request.prompt.empty()) throw GatewayError(GatewayErrorKind::Config, "empty prompt");
    if (config_.mode == BackendMode::Replay) return complete_replay(request);

    acquire_slot();
    struct SlotGuard {
        LlmGateway* self;
        ~SlotGuard() { self->release_slot(); }
    } guard{this};
    return complete_live(request);
}

LlmResponse LlmGateway::complete_replay(const LlmRequest& request) const {
    const auto start = std::chrono::steady_clock::now();
    const auto path = fixture_path(config_.fixtures_dir, request.request_tag);
    if (!std::filesystem::exists(path)) {
        throw GatewayError(GatewayErrorKind::FixtureMissing, "no fixture for request tag " + request.request_tag);
    }
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw GatewayError(GatewayErrorKind::Protocol, "corrupt fixture " + path.string() + ": " + e.what());
    }
    if (!doc.contains("response") || !doc["response"].is_string()) {
        throw GatewayError(GatewayErrorKind::Protocol, "fixture " + path.string() + " has no response text");
    }
    LlmResponse out;
    out.text = doc["response"].get<std::string>();
    out.backend = BackendMode::Replay;
    out.truncated = doc.value("truncated", false);
    out.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return out;
}

LlmResponse LlmGateway::complete_live(const LlmRequest& request) {
    const auto url = parse_url(config_.endpoint_url);
    httplib::Headers headers;
    if (!config_.auth_token_env_var.empty()) {
        if (const char* token = std::getenv(config_.auth_token_env_var.c_str()); token != nullptr && *token) {
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }
    }
    const json body = {
        {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_output_tokens},
    };
    const std::string payload = body.dump();

    const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    auto backoff = std::chrono::milliseconds(config_.retry_backoff_ms);
    std::string last_error;
    GatewayErrorKind last_kind = GatewayErrorKind::Transport;

    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        httplib::Client client(url.scheme_host_port);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);

        const auto start = std::chrono::steady_clock::now();
        auto res = client.Post(url.path, headers, payload, "application/json");
        const double elapsed =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

        if (!res) {
            const auto err = res.error();
            const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                                   (err == httplib::Error::Read && elapsed >= 0.9 * config_.timeout_ms);
            last_kind = timed_out ? GatewayErrorKind::Timeout : GatewayErrorKind::Transport;
            last_error = httplib::to_string(err);
            continue;
        }
        if (res->status >= 500) {
            last_kind = GatewayErrorKind::Http;
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw GatewayError(GatewayErrorKind::Http,
                               "HTTP " + std::to_string(res->status) + " from " + config_.endpoint_url);
        }
        auto [text, truncated] = read_completion_body(res->body);
        if (!config_.fixtures_dir.empty()) write_fixture(config_.fixtures_dir, request, text, truncated);

        LlmResponse out;
        out.text = std::move(text);
        out.backend = BackendMode::Live;
        out.latency_ms = elapsed;
        out.truncated = truncated;
        return out;
    }
    throw GatewayError(last_kind, "request " + request.request_tag + " failed after " +
                                      std::to_string(config_.max_retries + 1) + " attempts: " + last_error);
}

LlmResponse complete(const LlmRequest& request, const BackendConfig& config) {
    LlmGateway gateway(config);
    return gateway.complete(request);
}

}  // namespace pkgforge
