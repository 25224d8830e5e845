#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "pkgforge/serving.h"

namespace httplib {
class Server;
}

namespace pkgforge {

struct ServerOptions {
    std::string host = "127.0.0.1";
    /// 0 binds an ephemeral port.
    int port = 8080;
    std::size_t default_k = 6;
    std::size_t worker_threads = 32;
    /// Raw JSON of the most recent validation report, exposed on /stats.
    std::optional<std::string> latest_report_json;
};

/// HTTP front end over an atomically swappable cache snapshot. Each request
/// pins the snapshot it started with.
class RecommendationServer {
public:
    RecommendationServer(std::shared_ptr<const ServingCache> cache, ServerOptions options);
    ~RecommendationServer();

    RecommendationServer(const RecommendationServer&) = delete;
    RecommendationServer& operator=(const RecommendationServer&) = delete;

    /// Binds the socket and returns the bound port.
    int bind();
    /// Serves on a background thread; bind() must have succeeded.
    void start();
    /// Serves on the calling thread until stop().
    void run();
    void stop();

    std::shared_ptr<const ServingCache> snapshot() const;
    void swap(std::shared_ptr<const ServingCache> next);
    /// Loads and verifies `path`; on failure the current snapshot keeps
    /// serving and the error is returned.
    std::optional<std::string> reload_cache(const std::filesystem::path& path);

    int port() const noexcept { return port_; }

private:
    void install_routes();

    ServerOptions options_;
    std::unique_ptr<httplib::Server> server_;
    mutable std::mutex mu_;
    std::shared_ptr<const ServingCache> cache_;
    std::thread thread_;
    int port_ = -1;
};

}  // namespace pkgforge
