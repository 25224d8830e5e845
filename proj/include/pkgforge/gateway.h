#pragma once

#include <condition_variable>
#include <filesystem>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pkgforge {

enum class GatewayErrorKind { Config, Transport, Timeout, Http, FixtureMissing, Protocol };

class GatewayError : public std::runtime_error {
public:
    GatewayError(GatewayErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    GatewayErrorKind kind() const noexcept { return kind_; }

private:
    GatewayErrorKind kind_;
};

enum class BackendMode { Live, Replay };

struct LlmRequest {
    std::string prompt;
    double temperature = 0.2;
    int max_output_tokens = 1024;
    std::string request_tag;
};

struct LlmResponse {
    std::string text;
    BackendMode backend = BackendMode::Replay;
    double latency_ms = 0.0;
    bool truncated = false;
};

struct BackendConfig {
    BackendMode mode = BackendMode::Replay;
    std::string endpoint_url;
    std::string auth_token_env_var;
    std::filesystem::path fixtures_dir;
    int max_in_flight = 4;
    int max_retries = 3;
    int timeout_ms = 60000;
    /// First retry delay; doubles on each further attempt.
    int retry_backoff_ms = 500;
};

/// Throws GatewayError(Config) when the mode's required fields are missing.
void check_backend_config(const BackendConfig& config);

/// FNV-1a-64 over `"%.6f" % temperature`, a NUL byte, then the prompt bytes.
std::string compute_request_tag(std::string_view prompt_text, double temperature);

LlmRequest make_request(std::string prompt, double temperature, int max_output_tokens);

std::filesystem::path fixture_path(const std::filesystem::path& fixtures_dir, std::string_view request_tag);

/// Writes `<tag>.json` atomically. Used by the live backend and by corpus tooling.
void write_fixture(const std::filesystem::path& fixtures_dir, const LlmRequest& request, std::string_view response_text,
                   bool truncated = false);

/// Completion client shared by pipeline workers. The in-flight limiter is the
/// only shared mutable state.
class LlmGateway {
public:
    explicit LlmGateway(BackendConfig config);

    LlmResponse complete(const LlmRequest& request);

    const BackendConfig& config() const noexcept { return config_; }

private:
    LlmResponse complete_live(const LlmRequest& request);
    LlmResponse complete_replay(const LlmRequest& request) const;

    void acquire_slot();
    void release_slot();

    BackendConfig config_;
    std::mutex slot_mutex_;
    std::condition_variable slot_cv_;
    int in_flight_ = 0;
};

/// One-off completion; the limiter is scoped to this call.
LlmResponse complete(const LlmRequest& request, const BackendConfig& config);

}  // namespace pkgforge
