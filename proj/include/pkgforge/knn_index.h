#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pkgforge/embedding.h"

namespace pkgforge {

class IndexError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class IndexMode : std::uint32_t { Exact = 0, Approximate = 1 };

IndexMode index_mode_from_string(std::string_view s);

/// Layered small-world graph parameters for approximate mode.
struct HnswParams {
    std::uint32_t max_neighbors = 16;
    std::uint32_t ef_construction = 100;
    std::uint32_t ef_search = 64;
    std::uint64_t seed = 0x5eed5eedULL;
};

struct KnnMatch {
    std::string item_id;
    double similarity = 0.0;

    bool operator==(const KnnMatch&) const = default;
};

/// Descending similarity, ties by ascending item_id.
bool match_order(const KnnMatch& a, const KnnMatch& b);

/// Cosine KNN over unit vectors. Vectors are inserted serially; once built the
/// index is read-only and safe for concurrent queries.
class KnnIndex {
public:
    KnnIndex(std::size_t dimension, IndexMode mode, HnswParams params = {});

    /// Stores a unit-normalized copy. Throws IndexError on a duplicate id or a
    /// dimension mismatch.
    void add(std::string item_id, const EmbeddingVector& vector);

    std::vector<KnnMatch> query(const EmbeddingVector& query, std::size_t k) const;
    /// Brute-force scan regardless of mode.
    std::vector<KnnMatch> query_exact(std::span<const float> query, std::size_t k) const;

    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t dimension() const noexcept { return dimension_; }
    IndexMode mode() const noexcept { return mode_; }
    const HnswParams& params() const noexcept { return params_; }
    const std::string& item_id(std::size_t i) const { return ids_.at(i); }
    std::span<const float> vector(std::size_t i) const;
    bool contains(std::string_view item_id) const { return by_id_.contains(std::string(item_id)); }

    /// Magic, version, mode, parameters, dimension, count, row-major float32
    /// vectors, then the id table. Approximate-mode graphs are rebuilt on load.
    void save(const std::filesystem::path& path) const;
    static KnnIndex load(const std::filesystem::path& path);

private:
    struct Node {
        // links[level] holds neighbor ordinals on that level
        std::vector<std::vector<std::uint32_t>> links;
    };
    using Scored = std::pair<double, std::uint32_t>;

    double similarity(std::span<const float> q, std::uint32_t node) const;
    std::vector<Scored> search_layer(std::span<const float> q, std::vector<Scored> entry, std::size_t ef,
                                     std::size_t level) const;
    std::vector<std::uint32_t> select_neighbors(std::vector<Scored> candidates, std::size_t m) const;
    void insert_into_graph(std::uint32_t node);
    int draw_level();

    std::size_t dimension_;
    IndexMode mode_;
    HnswParams params_;
    std::vector<std::string> ids_;
    std::vector<float> data_;
    std::unordered_map<std::string, std::uint32_t> by_id_;

    std::vector<Node> nodes_;
    std::int64_t entry_point_ = -1;
    int max_level_ = -1;
    std::uint64_t rng_state_;
};

struct CatalogItem {
    std::string item_id;
    std::string title;
    std::string brand;
    std::string category;

    bool operator==(const CatalogItem&) const = default;
};

/// One JSON object per line with item_id, title, brand, category.
std::vector<CatalogItem> load_catalog(const std::filesystem::path& path);
std::vector<CatalogItem> parse_catalog(std::string_view jsonl);

/// Embeds every title and inserts in catalog order. Throws IndexError on an
/// empty catalog or duplicate ids; provider failures name the item.
KnnIndex build_index(const std::vector<CatalogItem>& catalog, const EmbeddingProvider& provider,
                     IndexMode mode = IndexMode::Exact, HnswParams params = {});

}  // namespace pkgforge
