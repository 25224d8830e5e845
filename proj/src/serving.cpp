#include "pkgforge/serving.h"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <map>
#include <set>

#include <json.hpp>

#include "pkgforge/graph_io.h"
#include "pkgforge/util.h"

namespace pkgforge {

namespace {

constexpr char kMagic[8] = {'P', 'K', 'G', 'C', 'A', 'C', 'H', 'E'};
constexpr std::uint32_t kCacheVersion = 1;
// magic + version + graph hash + timestamp + table size + entry count + checksum
constexpr std::size_t kHeaderSize = 8 + 4 + 8 + 8 + 8 + 8 + 8;

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

void put_str(std::string& out, std::string_view s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out += s;
}

class Reader {
public:
    Reader(std::string_view data, std::size_t pos = 0) : data_(data), pos_(pos) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string str() {
        const auto n = get<std::uint32_t>();
        need(n);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::string_view bytes(std::size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }
    void seek(std::size_t p) {
        if (p > data_.size()) throw CacheError("cache offset out of range");
        pos_ = p;
    }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw CacheError("cache file truncated");
    }
    std::string_view data_;
    std::size_t pos_;
};

bool neighbor_order(const CacheNeighbor& a, const CacheNeighbor& b) {
    if (a.score.has_value() != b.score.has_value()) return a.score.has_value();
    if (a.score && *a.score != *b.score) return *a.score > *b.score;
    return a.item_id < b.item_id;
}

// Sorts, then keeps the first (best-ranked) occurrence of every item.
void finalize_neighbors(std::vector<CacheNeighbor>& ns) {
    std::stable_sort(ns.begin(), ns.end(), neighbor_order);
    std::set<std::string> seen;
    std::vector<CacheNeighbor> out;
    out.reserve(ns.size());
    for (auto& n : ns) {
        if (seen.insert(n.item_id).second) out.push_back(std::move(n));
    }
    ns = std::move(out);
}

template <typename Map>
std::vector<const typename Map::value_type*> sorted_view(const Map& m) {
    std::vector<const typename Map::value_type*> v;
    v.reserve(m.size());
    for (const auto& kv : m) v.push_back(&kv);
    std::sort(v.begin(), v.end(), [](auto* a, auto* b) { return a->first < b->first; });
    return v;
}

std::uint64_t header_digest(std::uint64_t graph_hash, std::int64_t ts, std::uint64_t table, std::uint64_t entries) {
    std::string h;
    put(h, graph_hash);
    put(h, ts);
    put(h, table);
    put(h, entries);
    return fnv1a64(h);
}

RecommendationResponse lookup(const ServingCache& cache, EntryKind kind, std::string_view key, std::size_t k) {
    const auto start = std::chrono::steady_clock::now();
    if (k == 0) throw CacheError("k must be >= 1");
    RecommendationResponse r;
    r.seed_key = std::string(key);
    const CacheEntry* entry = cache.find(kind, key);
    if (entry == nullptr) {
        r.fallback = true;
    } else {
        const auto n = std::min(k, entry->neighbors.size());
        r.items.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& nb = entry->neighbors[i];
            const ItemInfo* info = cache.item_info(nb.item_id);
            r.items.push_back({nb.item_id, info ? info->title : std::string(), nb.predicate, nb.score});
        }
    }
    r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return r;
}

}  // namespace

ServingCache::ServingCache(EntryMap items, EntryMap groups, ItemTable table, std::uint64_t source_graph_hash,
                           std::int64_t build_timestamp)
    : items_(std::move(items)), groups_(std::move(groups)), table_(std::move(table)) {
    meta_.source_graph_hash = source_graph_hash;
    meta_.build_timestamp = build_timestamp;
    meta_.item_entry_count = items_.size();
    meta_.group_entry_count = groups_.size();
    meta_.item_table_size = table_.size();
    meta_.checksum = fnv1a64(body(), header_digest(source_graph_hash, build_timestamp, table_.size(),
                                                   items_.size() + groups_.size()));
}

const CacheEntry* ServingCache::find(EntryKind kind, std::string_view key) const {
    const auto& m = kind == EntryKind::Item ? items_ : groups_;
    auto it = m.find(key);
    return it == m.end() ? nullptr : &it->second;
}

const ItemInfo* ServingCache::item_info(std::string_view item_id) const {
    auto it = table_.find(item_id);
    return it == table_.end() ? nullptr : &it->second;
}

std::string ServingCache::snapshot_hash() const { return to_hex64(meta_.checksum); }

std::string ServingCache::body() const {
    std::string table;
    for (const auto* kv : sorted_view(table_)) {
        put_str(table, kv->first);
        put_str(table, kv->second.title);
        put_str(table, kv->second.brand);
    }

    std::vector<const CacheEntry*> entries;
    entries.reserve(items_.size() + groups_.size());
    for (const auto* kv : sorted_view(items_)) entries.push_back(&kv->second);
    for (const auto* kv : sorted_view(groups_)) entries.push_back(&kv->second);

    std::string index;
    std::string lists;
    for (const auto* e : entries) {
        put<std::uint8_t>(index, static_cast<std::uint8_t>(e->kind));
        put_str(index, e->key);
        put<std::uint64_t>(index, lists.size());
        put<std::uint32_t>(lists, static_cast<std::uint32_t>(e->neighbors.size()));
        for (const auto& n : e->neighbors) {
            put_str(lists, n.item_id);
            put_str(lists, n.predicate);
            put<std::int32_t>(lists, n.score.value_or(0));
            put<std::uint8_t>(lists, static_cast<std::uint8_t>(n.source));
        }
    }

    std::string out;
    out.reserve(table.size() + index.size() + lists.size() + 24);
    put<std::uint64_t>(out, table.size());
    out += table;
    put<std::uint64_t>(out, index.size());
    out += index;
    put<std::uint64_t>(out, lists.size());
    out += lists;
    return out;
}

std::string ServingCache::serialize() const {
    std::string out;
    out.append(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCacheVersion);
    put<std::uint64_t>(out, meta_.source_graph_hash);
    put<std::int64_t>(out, meta_.build_timestamp);
    put<std::uint64_t>(out, table_.size());
    put<std::uint64_t>(out, items_.size() + groups_.size());
    put<std::uint64_t>(out, meta_.checksum);
    out += body();
    return out;
}

ServingCache ServingCache::deserialize(std::string_view bytes) {
    if (bytes.size() < kHeaderSize) throw CacheError("cache file truncated");
    Reader r(bytes);
    if (r.bytes(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) throw CacheError("not a cache file");
    if (r.get<std::uint32_t>() != kCacheVersion) throw CacheError("unsupported cache version");
    const auto graph_hash = r.get<std::uint64_t>();
    const auto ts = r.get<std::int64_t>();
    const auto table_count = r.get<std::uint64_t>();
    const auto entry_count = r.get<std::uint64_t>();
    const auto checksum = r.get<std::uint64_t>();
    const auto body_bytes = bytes.substr(kHeaderSize);
    if (fnv1a64(body_bytes, header_digest(graph_hash, ts, table_count, entry_count)) != checksum) {
        throw CacheError("cache checksum mismatch");
    }

    Reader b(body_bytes);
    const auto table_len = b.get<std::uint64_t>();
    const auto table_start = b.pos();
    ItemTable table;
    table.reserve(table_count);
    for (std::uint64_t i = 0; i < table_count; ++i) {
        auto id = b.str();
        ItemInfo info;
        info.title = b.str();
        info.brand = b.str();
        if (!table.emplace(std::move(id), std::move(info)).second) throw CacheError("duplicate item in item table");
    }
    if (b.pos() - table_start != table_len) throw CacheError("item table length mismatch");

    const auto index_len = b.get<std::uint64_t>();
    const auto index_start = b.pos();
    struct IndexRow {
        EntryKind kind;
        std::string key;
        std::uint64_t offset;
    };
    std::vector<IndexRow> rows;
    rows.reserve(entry_count);
    for (std::uint64_t i = 0; i < entry_count; ++i) {
        const auto kind = b.get<std::uint8_t>();
        if (kind > 1) throw CacheError("bad entry kind");
        auto key = b.str();
        rows.push_back({static_cast<EntryKind>(kind), std::move(key), b.get<std::uint64_t>()});
    }
    if (b.pos() - index_start != index_len) throw CacheError("entry index length mismatch");
    const auto lists_len = b.get<std::uint64_t>();
    const auto lists_start = b.pos();
    if (body_bytes.size() - lists_start != lists_len) throw CacheError("neighbor section length mismatch");

    EntryMap items;
    EntryMap groups;
    for (auto& row : rows) {
        if (row.offset >= lists_len) throw CacheError("entry offset out of range");
        b.seek(lists_start + row.offset);
        CacheEntry e;
        e.kind = row.kind;
        e.key = row.key;
        const auto n = b.get<std::uint32_t>();
        e.neighbors.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            CacheNeighbor nb;
            nb.item_id = b.str();
            nb.predicate = b.str();
            const auto score = b.get<std::int32_t>();
            if (score != 0) nb.score = score;
            const auto src = b.get<std::uint8_t>();
            if (src > 2) throw CacheError("bad edge source");
            nb.source = static_cast<EdgeSource>(src);
            if (!table.contains(nb.item_id)) throw CacheError("neighbor '" + nb.item_id + "' missing from item table");
            e.neighbors.push_back(std::move(nb));
        }
        auto& target = row.kind == EntryKind::Item ? items : groups;
        if (!target.emplace(row.key, std::move(e)).second) throw CacheError("duplicate cache key '" + row.key + "'");
    }
    ServingCache cache(std::move(items), std::move(groups), std::move(table), graph_hash, ts);
    if (cache.meta_.checksum != checksum) throw CacheError("cache re-encoding mismatch");
    return cache;
}

void ServingCache::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

ServingCache ServingCache::load(const std::filesystem::path& path) {
    std::string bytes;
    try {
        bytes = read_file(path);
    } catch (const IoError& e) {
        throw CacheError(e.what());
    }
    return deserialize(bytes);
}

std::int64_t default_build_timestamp() {
    if (const char* s = std::getenv("SOURCE_DATE_EPOCH"); s != nullptr && *s) {
        char* end = nullptr;
        const long long v = std::strtoll(s, &end, 10);
        if (end != s && *end == '\0') return v;
    }
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

ServingCache compile_cache(const KnowledgeGraph& fused, std::optional<std::int64_t> build_timestamp) {
    if (auto problems = fused.integrity_problems(); !problems.empty()) {
        throw CacheError("fused graph failed integrity check: " + problems.front());
    }
    ServingCache::ItemTable table;
    for (const auto& [id, node] : fused.products()) table.emplace(id, ItemInfo{node.title, node.brand});

    ServingCache::EntryMap items;
    for (const auto& [key, edge] : fused.edges()) {
        auto& e = items[edge.subject_id];
        e.key = edge.subject_id;
        e.kind = EntryKind::Item;
        e.neighbors.push_back({edge.object_id, edge.predicate, edge.score, edge.source});
    }
    for (auto& [k, e] : items) finalize_neighbors(e.neighbors);

    ServingCache::EntryMap groups;
    for (const auto& a : fused.audience_edges()) {
        auto& e = groups[a.group_id];
        e.key = a.group_id;
        e.kind = EntryKind::Group;
        e.neighbors.push_back({a.product_id, std::string(kAudiencePredicate), std::nullopt, EdgeSource::Audience});
    }
    for (auto& [k, e] : groups) finalize_neighbors(e.neighbors);

    return ServingCache(std::move(items), std::move(groups), std::move(table), graph_hash(fused),
                        build_timestamp.value_or(default_build_timestamp()));
}

RecommendationResponse lookup_item(const ServingCache& cache, std::string_view item_id, std::size_t k) {
    return lookup(cache, EntryKind::Item, item_id, k);
}

RecommendationResponse lookup_group(const ServingCache& cache, std::string_view group_id, std::size_t k) {
    return lookup(cache, EntryKind::Group, group_id, k);
}

std::string response_to_json(const RecommendationResponse& response, std::string_view snapshot_hash) {
    nlohmann::ordered_json doc;
    doc["seed_key"] = response.seed_key;
    doc["fallback"] = response.fallback;
    auto items = nlohmann::ordered_json::array();
    for (const auto& it : response.items) {
        nlohmann::ordered_json j;
        j["item_id"] = it.item_id;
        j["title"] = it.title;
        j["rationale"] = it.rationale;
        j["score"] = it.score ? nlohmann::ordered_json(*it.score) : nlohmann::ordered_json(nullptr);
        items.push_back(std::move(j));
    }
    doc["items"] = std::move(items);
    doc["latency_ms"] = response.latency_ms;
    doc["snapshot"] = snapshot_hash;
    return doc.dump();
}

std::string cache_debug_jsonl(const ServingCache& cache) {
    std::string out;
    auto emit = [&](const ServingCache::EntryMap& m, std::string_view kind) {
        for (const auto* kv : sorted_view(m)) {
            nlohmann::ordered_json j;
            j["kind"] = kind;
            j["key"] = kv->first;
            auto ns = nlohmann::ordered_json::array();
            for (const auto& n : kv->second.neighbors) {
                nlohmann::ordered_json x;
                x["item_id"] = n.item_id;
                x["predicate"] = n.predicate;
                x["score"] = n.score ? nlohmann::ordered_json(*n.score) : nlohmann::ordered_json(nullptr);
                x["source"] = to_string(n.source);
                ns.push_back(std::move(x));
            }
            j["neighbors"] = std::move(ns);
            out += j.dump();
            out += '\n';
        }
    };
    emit(cache.item_entries(), "item");
    emit(cache.group_entries(), "group");
    return out;
}

}  // namespace pkgforge
