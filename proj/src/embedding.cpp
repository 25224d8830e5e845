#include "pkgforge/embedding.h"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "pkgforge/util.h"

namespace pkgforge {

double EmbeddingVector::norm() const { return std::sqrt(dot(values, values)); }

double dot(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

EmbeddingVector normalized(std::vector<float> v) {
    double sq = 0.0;
    for (float x : v) {
        if (!std::isfinite(x)) throw EmbeddingError("embedding has a non-finite component");
        sq += static_cast<double>(x) * x;
    }
    if (sq == 0.0) throw EmbeddingError("cannot normalize a zero vector");
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& x : v) x = static_cast<float>(x * inv);
    return EmbeddingVector{std::move(v)};
}

std::vector<EmbeddingVector> EmbeddingProvider::embed_batch(const std::vector<std::string>& titles) const {
    std::vector<EmbeddingVector> out;
    out.reserve(titles.size());
    for (const auto& t : titles) out.push_back(embed(t));
    return out;
}

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw EmbeddingError("embedding dimension must be positive");
}

std::vector<std::string> HashingEmbedder::tokenize(std::string_view title) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : title) {
        if (c >= 0x80 || std::isalnum(c) != 0) {
            cur.push_back(static_cast<char>(c >= 0x80 ? c : std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

EmbeddingVector HashingEmbedder::embed(std::string_view title) const {
    if (trim(title).empty()) throw EmbeddingError("cannot embed an empty title");
    const auto tokens = tokenize(title);
    if (tokens.empty()) throw EmbeddingError("title '" + std::string(title) + "' has no alphanumeric tokens");
    std::vector<float> v(dimension_, 0.0f);
    for (const auto& t : tokens) v[fnv1a64(t) % dimension_] += 1.0f;
    return normalized(std::move(v));
}

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderConfig config) : config_(std::move(config)) {
    if (config_.endpoint_url.empty()) throw EmbeddingError("remote embedder needs an endpoint_url");
    if (config_.dimension == 0) throw EmbeddingError("remote embedder needs a dimension");
    if (config_.batch_size == 0) config_.batch_size = 1;
}

EmbeddingVector RemoteEmbedder::embed(std::string_view title) const {
    return embed_batch({std::string(title)}).front();
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(const std::vector<std::string>& titles) const {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(config_.endpoint_url, m, re)) {
        throw EmbeddingError("malformed embedding endpoint " + config_.endpoint_url);
    }
    const std::string base = m[1].str();
    const std::string path = m[2].matched ? m[2].str() : "/";

    for (const auto& t : titles) {
        if (trim(t).empty()) throw EmbeddingError("cannot embed an empty title");
    }

    httplib::Client client(base);
    const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    httplib::Headers headers;
    if (!config_.auth_token_env_var.empty()) {
        if (const char* tok = std::getenv(config_.auth_token_env_var.c_str()); tok != nullptr && *tok) {
            headers.emplace("Authorization", std::string("Bearer ") + tok);
        }
    }

    std::vector<EmbeddingVector> out;
    out.reserve(titles.size());
    for (std::size_t start = 0; start < titles.size(); start += config_.batch_size) {
        const auto end = std::min(titles.size(), start + config_.batch_size);
        nlohmann::json body = {{"input", std::vector<std::string>(titles.begin() + static_cast<std::ptrdiff_t>(start),
                                                                  titles.begin() + static_cast<std::ptrdiff_t>(end))}};
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) throw EmbeddingError("embedding request failed: " + httplib::to_string(res.error()));
        if (res->status != 200) throw EmbeddingError("embedding endpoint returned HTTP " + std::to_string(res->status));
        auto doc = nlohmann::json::parse(res->body, nullptr, false);
        if (doc.is_discarded() || !doc.contains("embeddings") || !doc["embeddings"].is_array()) {
            throw EmbeddingError("embedding response lacks an \"embeddings\" array");
        }
        const auto& rows = doc["embeddings"];
        if (rows.size() != end - start) throw EmbeddingError("embedding response has the wrong row count");
        for (const auto& row : rows) {
            auto values = row.get<std::vector<float>>();
            if (values.size() != config_.dimension) {
                throw EmbeddingError("dimension mismatch: expected " + std::to_string(config_.dimension) + ", got " +
                                     std::to_string(values.size()));
            }
            out.push_back(normalized(std::move(values)));
        }
    }
    return out;
}

}  // namespace pkgforge
