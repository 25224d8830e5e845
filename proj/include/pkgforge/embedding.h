#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pkgforge {

class EmbeddingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unit-normalized dense vector.
struct EmbeddingVector {
    std::vector<float> values;

    std::size_t dimension() const noexcept { return values.size(); }
    double norm() const;
};

/// Scales `v` to unit length; throws EmbeddingError on a zero vector.
EmbeddingVector normalized(std::vector<float> v);

/// Dot product accumulated in double, in index order.
double dot(std::span<const float> a, std::span<const float> b);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dimension() const = 0;
    virtual EmbeddingVector embed(std::string_view title) const = 0;
    /// Default implementation embeds one title at a time.
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& titles) const;
};

/// Deterministic bag-of-words embedder: lowercase, split on
/// non-alphanumerics, add 1.0 at FNV-1a-64(token) mod D, L2-normalize.
class HashingEmbedder final : public EmbeddingProvider {
public:
    static constexpr std::size_t kDefaultDimension = 64;

    explicit HashingEmbedder(std::size_t dimension = kDefaultDimension);

    std::size_t dimension() const override { return dimension_; }
    EmbeddingVector embed(std::string_view title) const override;

    static std::vector<std::string> tokenize(std::string_view title);

private:
    std::size_t dimension_;
};

struct RemoteEmbedderConfig {
    std::string endpoint_url;
    std::size_t dimension = 0;
    std::string auth_token_env_var;
    int timeout_ms = 30000;
    std::size_t batch_size = 64;
};

/// POSTs `{"input": [titles]}` and reads `{"embeddings": [[floats]]}`.
class RemoteEmbedder final : public EmbeddingProvider {
public:
    explicit RemoteEmbedder(RemoteEmbedderConfig config);

    std::size_t dimension() const override { return config_.dimension; }
    EmbeddingVector embed(std::string_view title) const override;
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& titles) const override;

private:
    RemoteEmbedderConfig config_;
};

}  // namespace pkgforge
