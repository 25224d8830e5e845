#include "pkgforge/server.h"

#include <charconv>

#include <httplib.h>
#include <json.hpp>

#include "pkgforge/util.h"

namespace pkgforge {

namespace {

void send_json(httplib::Response& res, int status, const std::string& body) {
    res.status = status;
    res.set_header("Cache-Control", "no-store");
    res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view message) {
    nlohmann::json j = {{"error", message}, {"status", status}};
    send_json(res, status, j.dump());
}

// nullopt on a malformed or non-positive k
std::optional<std::size_t> parse_k(const httplib::Request& req, std::size_t fallback) {
    if (!req.has_param("k")) return fallback;
    const auto s = req.get_param_value("k");
    std::size_t k = 0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, k);
    if (ec != std::errc() || p != end || s.empty() || k == 0) return std::nullopt;
    return std::min(k, kMaxResponseItems);
}

nlohmann::ordered_json metadata_json(const ServingCache& cache) {
    const auto& m = cache.metadata();
    nlohmann::ordered_json j;
    j["snapshot"] = cache.snapshot_hash();
    j["source_graph_hash"] = to_hex64(m.source_graph_hash);
    j["build_timestamp"] = m.build_timestamp;
    j["entry_count"] = m.entry_count();
    j["item_entry_count"] = m.item_entry_count;
    j["group_entry_count"] = m.group_entry_count;
    j["item_table_size"] = m.item_table_size;
    j["value_order"] = kValueOrder;
    return j;
}

}  // namespace

RecommendationServer::RecommendationServer(std::shared_ptr<const ServingCache> cache, ServerOptions options)
    : options_(std::move(options)), server_(std::make_unique<httplib::Server>()), cache_(std::move(cache)) {
    if (!cache_) throw CacheError("server needs a loaded cache");
    if (options_.default_k == 0) options_.default_k = 1;
    const auto threads = std::max<std::size_t>(options_.worker_threads, 1);
    server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    server_->set_tcp_nodelay(true);
    install_routes();
}

RecommendationServer::~RecommendationServer() { stop(); }

std::shared_ptr<const ServingCache> RecommendationServer::snapshot() const {
    std::lock_guard lock(mu_);
    return cache_;
}

void RecommendationServer::swap(std::shared_ptr<const ServingCache> next) {
    if (!next) throw CacheError("cannot swap in an empty snapshot");
    std::lock_guard lock(mu_);
    cache_.swap(next);
    // the old snapshot is released outside the lock when `next` goes out of scope
}

std::optional<std::string> RecommendationServer::reload_cache(const std::filesystem::path& path) {
    try {
        swap(std::make_shared<const ServingCache>(ServingCache::load(path)));
        return std::nullopt;
    } catch (const std::exception& e) {
        return std::string(e.what());
    }
}

void RecommendationServer::install_routes() {
    auto recs = [this](EntryKind kind) {
        return [this, kind](const httplib::Request& req, httplib::Response& res) {
            const auto k = parse_k(req, options_.default_k);
            if (!k) {
                send_error(res, 400, "k must be a positive integer");
                return;
            }
            const auto snap = snapshot();
            const auto key = req.matches[1].str();
            const auto r = kind == EntryKind::Item ? lookup_item(*snap, key, *k) : lookup_group(*snap, key, *k);
            send_json(res, 200, response_to_json(r, snap->snapshot_hash()));
        };
    };
    server_->Get(R"(/recs/item/([^/]+))", recs(EntryKind::Item));
    server_->Get(R"(/recs/group/([^/]+))", recs(EntryKind::Group));
    server_->Get("/health", [this](const httplib::Request&, httplib::Response& res) {
        const auto snap = snapshot();
        nlohmann::ordered_json j;
        j["status"] = "ok";
        j["build_metadata"] = metadata_json(*snap);
        send_json(res, 200, j.dump());
    });
    server_->Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
        const auto snap = snapshot();
        nlohmann::ordered_json j;
        j["snapshot"] = snap->snapshot_hash();
        j["item_entries"] = snap->metadata().item_entry_count;
        j["group_entries"] = snap->metadata().group_entry_count;
        j["item_table_size"] = snap->metadata().item_table_size;
        if (options_.latest_report_json) {
            auto report = nlohmann::ordered_json::parse(*options_.latest_report_json, nullptr, false);
            j["latest_validation_report"] = report.is_discarded() ? nlohmann::ordered_json(nullptr) : report;
        } else {
            j["latest_validation_report"] = nullptr;
        }
        send_json(res, 200, j.dump());
    });
    server_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.status == 404 && res.body.empty()) send_error(res, 404, "not found");
    });
    server_->set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string msg = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            msg = e.what();
        } catch (...) {
        }
        send_error(res, 500, msg);
    });
}

int RecommendationServer::bind() {
    if (options_.port == 0) {
        port_ = server_->bind_to_any_port(options_.host);
    } else {
        port_ = server_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
    }
    if (port_ < 0) throw CacheError("cannot bind " + options_.host + ":" + std::to_string(options_.port));
    return port_;
}

void RecommendationServer::start() {
    if (port_ < 0) bind();
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void RecommendationServer::run() {
    if (port_ < 0) bind();
    server_->listen_after_bind();
}

void RecommendationServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace pkgforge
