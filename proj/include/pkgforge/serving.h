#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pkgforge/graph.h"

namespace pkgforge {

class CacheError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kAudiencePredicate = "audience match";
inline constexpr std::string_view kValueOrder = "score_desc_unscored_last_then_item_id";
inline constexpr std::size_t kMaxResponseItems = 24;

enum class EntryKind : std::uint8_t { Item = 0, Group = 1 };

struct CacheNeighbor {
    std::string item_id;
    std::string predicate;
    std::optional<int> score;
    EdgeSource source = EdgeSource::Generated;

    bool operator==(const CacheNeighbor&) const = default;
};

struct CacheEntry {
    std::string key;
    EntryKind kind = EntryKind::Item;
    std::vector<CacheNeighbor> neighbors;

    bool operator==(const CacheEntry&) const = default;
};

struct ItemInfo {
    std::string title;
    std::string brand;

    bool operator==(const ItemInfo&) const = default;
};

struct CacheMetadata {
    std::uint64_t source_graph_hash = 0;
    std::int64_t build_timestamp = 0;
    std::size_t item_entry_count = 0;
    std::size_t group_entry_count = 0;
    std::size_t item_table_size = 0;
    /// Digest of the serialized snapshot; identifies it in responses.
    std::uint64_t checksum = 0;

    std::size_t entry_count() const noexcept { return item_entry_count + group_entry_count; }
};

struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
};

/// Immutable compiled snapshot.
class ServingCache {
public:
    using EntryMap = std::unordered_map<std::string, CacheEntry, StringHash, std::equal_to<>>;
    using ItemTable = std::unordered_map<std::string, ItemInfo, StringHash, std::equal_to<>>;

    ServingCache() = default;
    ServingCache(EntryMap items, EntryMap groups, ItemTable table, std::uint64_t source_graph_hash,
                 std::int64_t build_timestamp);

    const CacheEntry* find(EntryKind kind, std::string_view key) const;
    const ItemInfo* item_info(std::string_view item_id) const;

    const EntryMap& item_entries() const noexcept { return items_; }
    const EntryMap& group_entries() const noexcept { return groups_; }
    const ItemTable& item_table() const noexcept { return table_; }
    const CacheMetadata& metadata() const noexcept { return meta_; }
    std::string snapshot_hash() const;

    /// Magic, version, header, item table, entry index with offsets, then
    /// neighbor lists. All sections are in key order so output is stable.
    std::string serialize() const;
    /// Verifies magic, version, checksum and referential integrity.
    static ServingCache deserialize(std::string_view bytes);

    void save(const std::filesystem::path& path) const;
    static ServingCache load(const std::filesystem::path& path);

private:
    std::string body() const;

    EntryMap items_;
    EntryMap groups_;
    ItemTable table_;
    CacheMetadata meta_;
};

/// SOURCE_DATE_EPOCH when set, otherwise the current time.
std::int64_t default_build_timestamp();

/// Throws CacheError when the graph fails its integrity scan.
ServingCache compile_cache(const KnowledgeGraph& fused, std::optional<std::int64_t> build_timestamp = std::nullopt);

struct RecommendedItem {
    std::string item_id;
    std::string title;
    std::string rationale;
    std::optional<int> score;

    bool operator==(const RecommendedItem&) const = default;
};

struct RecommendationResponse {
    std::string seed_key;
    std::vector<RecommendedItem> items;
    bool fallback = false;
    double latency_ms = 0.0;
};

/// Absent keys yield fallback=true with no items; k must be >= 1.
RecommendationResponse lookup_item(const ServingCache& cache, std::string_view item_id, std::size_t k);
RecommendationResponse lookup_group(const ServingCache& cache, std::string_view group_id, std::size_t k);

std::string response_to_json(const RecommendationResponse& response, std::string_view snapshot_hash);

/// One JSON object per entry, items before groups, keys ascending.
std::string cache_debug_jsonl(const ServingCache& cache);

}  // namespace pkgforge
