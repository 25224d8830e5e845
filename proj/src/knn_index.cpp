#include "pkgforge/knn_index.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <queue>

#include <json.hpp>

#include "pkgforge/util.h"

namespace pkgforge {

static_assert(std::endian::native == std::endian::little, "index files are little-endian");

namespace {

constexpr char kMagic[8] = {'P', 'K', 'G', 'K', 'N', 'N', 'I', 'X'};
constexpr std::uint32_t kIndexVersion = 1;

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct VisitedTags {
    std::vector<std::uint32_t> tags;
    std::uint32_t generation = 0;

    void reset(std::size_t n) {
        if (tags.size() < n) tags.resize(n, 0);
        if (++generation == 0) {
            std::fill(tags.begin(), tags.end(), 0);
            generation = 1;
        }
    }
    bool visit(std::uint32_t i) {
        if (tags[i] == generation) return false;
        tags[i] = generation;
        return true;
    }
};

VisitedTags& visited_tags() {
    thread_local VisitedTags tags;
    return tags;
}

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string_view bytes(std::size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw IndexError("index file truncated");
    }
    std::string_view data_;
    std::size_t pos_ = 0;
};

}  // namespace

IndexMode index_mode_from_string(std::string_view s) {
    if (s == "exact") return IndexMode::Exact;
    if (s == "approximate" || s == "hnsw") return IndexMode::Approximate;
    throw IndexError("unknown index mode '" + std::string(s) + "'");
}

bool match_order(const KnnMatch& a, const KnnMatch& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.item_id < b.item_id;
}

KnnIndex::KnnIndex(std::size_t dimension, IndexMode mode, HnswParams params)
    : dimension_(dimension), mode_(mode), params_(params), rng_state_(params.seed) {
    if (dimension_ == 0) throw IndexError("index dimension must be positive");
    if (params_.max_neighbors < 2) throw IndexError("max_neighbors must be >= 2");
    if (params_.ef_construction < 1 || params_.ef_search < 1) throw IndexError("beam widths must be positive");
}

std::span<const float> KnnIndex::vector(std::size_t i) const {
    if (i >= ids_.size()) throw IndexError("index ordinal out of range");
    return {data_.data() + i * dimension_, dimension_};
}

double KnnIndex::similarity(std::span<const float> q, std::uint32_t node) const {
    return dot(q, vector(node));
}

void KnnIndex::add(std::string item_id, const EmbeddingVector& v) {
    if (v.dimension() != dimension_) {
        throw IndexError("dimension mismatch for '" + item_id + "': expected " + std::to_string(dimension_) + ", got " +
                         std::to_string(v.dimension()));
    }
    if (by_id_.contains(item_id)) throw IndexError("duplicate item_id '" + item_id + "'");
    EmbeddingVector unit;
    try {
        unit = normalized(v.values);
    } catch (const EmbeddingError& e) {
        throw IndexError("vector for '" + item_id + "': " + e.what());
    }
    const auto ordinal = static_cast<std::uint32_t>(ids_.size());
    by_id_.emplace(item_id, ordinal);
    ids_.push_back(std::move(item_id));
    data_.insert(data_.end(), unit.values.begin(), unit.values.end());
    if (mode_ == IndexMode::Approximate) {
        nodes_.emplace_back();
        insert_into_graph(ordinal);
    }
}

int KnnIndex::draw_level() {
    const double ml = 1.0 / std::log(static_cast<double>(params_.max_neighbors));
    double u = static_cast<double>(splitmix64(rng_state_) >> 11) * 0x1.0p-53;
    if (u <= 0.0) u = 0x1.0p-53;
    return static_cast<int>(std::floor(-std::log(u) * ml));
}

std::vector<KnnIndex::Scored> KnnIndex::search_layer(std::span<const float> q, std::vector<Scored> entry,
                                                     std::size_t ef, std::size_t level) const {
    auto& visited = visited_tags();
    visited.reset(ids_.size());

    std::priority_queue<Scored> candidates;
    std::priority_queue<Scored, std::vector<Scored>, std::greater<>> best;
    for (const auto& e : entry) {
        if (!visited.visit(e.second)) continue;
        candidates.push(e);
        best.push(e);
        if (best.size() > ef) best.pop();
    }
    while (!candidates.empty()) {
        const auto current = candidates.top();
        if (best.size() >= ef && current.first < best.top().first) break;
        candidates.pop();
        const auto& links = nodes_[current.second].links;
        if (level >= links.size()) continue;
        for (const auto nb : links[level]) {
            if (!visited.visit(nb)) continue;
            const double s = similarity(q, nb);
            if (best.size() < ef || s > best.top().first) {
                candidates.emplace(s, nb);
                best.emplace(s, nb);
                if (best.size() > ef) best.pop();
            }
        }
    }
    std::vector<Scored> out;
    out.reserve(best.size());
    while (!best.empty()) {
        out.push_back(best.top());
        best.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

// Keeps a candidate only if it is closer to the base than to every neighbor
// already kept, which spreads links across directions.
std::vector<std::uint32_t> KnnIndex::select_neighbors(std::vector<Scored> candidates, std::size_t m) const {
    std::sort(candidates.begin(), candidates.end(), [](const Scored& a, const Scored& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::uint32_t> kept;
    kept.reserve(m);
    for (const auto& [sim_to_base, c] : candidates) {
        if (kept.size() >= m) break;
        bool good = true;
        for (const auto r : kept) {
            if (dot(vector(c), vector(r)) > sim_to_base) {
                good = false;
                break;
            }
        }
        if (good) kept.push_back(c);
    }
    return kept;
}

void KnnIndex::insert_into_graph(std::uint32_t node) {
    const int level = draw_level();
    nodes_[node].links.resize(static_cast<std::size_t>(level) + 1);
    if (entry_point_ < 0) {
        entry_point_ = node;
        max_level_ = level;
        return;
    }
    const auto q = vector(node);
    auto ep = static_cast<std::uint32_t>(entry_point_);
    double ep_sim = similarity(q, ep);
    for (int l = max_level_; l > level; --l) {
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto nb : nodes_[ep].links[static_cast<std::size_t>(l)]) {
                const double s = similarity(q, nb);
                if (s > ep_sim) {
                    ep_sim = s;
                    ep = nb;
                    changed = true;
                }
            }
        }
    }

    std::vector<Scored> entry{{ep_sim, ep}};
    for (int l = std::min(level, max_level_); l >= 0; --l) {
        const auto lvl = static_cast<std::size_t>(l);
        auto found = search_layer(q, entry, params_.ef_construction, lvl);
        const std::size_t max_links = l == 0 ? 2 * params_.max_neighbors : params_.max_neighbors;
        auto chosen = select_neighbors(found, params_.max_neighbors);
        nodes_[node].links[lvl] = chosen;
        for (const auto nb : chosen) {
            auto& nb_links = nodes_[nb].links[lvl];
            nb_links.push_back(node);
            if (nb_links.size() > max_links) {
                std::vector<Scored> cands;
                cands.reserve(nb_links.size());
                const auto base = vector(nb);
                for (const auto x : nb_links) cands.emplace_back(dot(base, vector(x)), x);
                nb_links = select_neighbors(std::move(cands), max_links);
            }
        }
        entry = std::move(found);
    }
    if (level > max_level_) {
        max_level_ = level;
        entry_point_ = node;
    }
}

std::vector<KnnMatch> KnnIndex::query_exact(std::span<const float> q, std::size_t k) const {
    if (q.size() != dimension_) {
        throw IndexError("query dimension " + std::to_string(q.size()) + " does not match index dimension " +
                         std::to_string(dimension_));
    }
    if (k == 0) throw IndexError("k must be >= 1");
    std::vector<KnnMatch> all;
    all.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) all.push_back({ids_[i], dot(q, vector(i))});
    const auto n = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), match_order);
    all.resize(n);
    return all;
}

std::vector<KnnMatch> KnnIndex::query(const EmbeddingVector& query, std::size_t k) const {
    if (query.dimension() != dimension_) {
        throw IndexError("query dimension " + std::to_string(query.dimension()) +
                         " does not match index dimension " + std::to_string(dimension_));
    }
    if (k == 0) throw IndexError("k must be >= 1");
    if (mode_ == IndexMode::Exact || k >= ids_.size() || entry_point_ < 0) return query_exact(query.values, k);

    const std::span<const float> q = query.values;
    auto ep = static_cast<std::uint32_t>(entry_point_);
    double ep_sim = similarity(q, ep);
    for (int l = max_level_; l > 0; --l) {
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto nb : nodes_[ep].links[static_cast<std::size_t>(l)]) {
                const double s = similarity(q, nb);
                if (s > ep_sim) {
                    ep_sim = s;
                    ep = nb;
                    changed = true;
                }
            }
        }
    }
    const auto found = search_layer(q, {{ep_sim, ep}}, std::max<std::size_t>(params_.ef_search, k), 0);
    std::vector<KnnMatch> out;
    out.reserve(found.size());
    for (const auto& [s, i] : found) out.push_back({ids_[i], s});
    std::sort(out.begin(), out.end(), match_order);
    if (out.size() > k) out.resize(k);
    return out;
}

void KnnIndex::save(const std::filesystem::path& path) const {
    std::string out;
    out.reserve(64 + data_.size() * sizeof(float) + ids_.size() * 16);
    out.append(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kIndexVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(mode_));
    put<std::uint32_t>(out, params_.max_neighbors);
    put<std::uint32_t>(out, params_.ef_construction);
    put<std::uint32_t>(out, params_.ef_search);
    put<std::uint64_t>(out, params_.seed);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(dimension_));
    put<std::uint64_t>(out, ids_.size());
    out.append(reinterpret_cast<const char*>(data_.data()), data_.size() * sizeof(float));
    for (const auto& id : ids_) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
        out += id;
    }
    write_file_atomic(path, out);
}

KnnIndex KnnIndex::load(const std::filesystem::path& path) {
    const std::string data = read_file(path);
    Reader r(data);
    if (r.bytes(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) throw IndexError("not an index file");
    if (r.get<std::uint32_t>() != kIndexVersion) throw IndexError("unsupported index version");
    const auto mode = r.get<std::uint32_t>();
    if (mode > 1) throw IndexError("unknown index mode in file");
    HnswParams params;
    params.max_neighbors = r.get<std::uint32_t>();
    params.ef_construction = r.get<std::uint32_t>();
    params.ef_search = r.get<std::uint32_t>();
    params.seed = r.get<std::uint64_t>();
    const auto dim = r.get<std::uint32_t>();
    const auto count = r.get<std::uint64_t>();
    if (dim == 0 || count > (data.size() / sizeof(float)) / dim) throw IndexError("index header is inconsistent");
    const auto raw = r.bytes(count * dim * sizeof(float));
    std::vector<float> values(count * dim);
    std::memcpy(values.data(), raw.data(), raw.size());

    KnnIndex index(dim, static_cast<IndexMode>(mode), params);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = r.get<std::uint32_t>();
        std::string id(r.bytes(len));
        EmbeddingVector v;
        v.values.assign(values.begin() + static_cast<std::ptrdiff_t>(i * dim),
                        values.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
        index.add(std::move(id), v);
    }
    if (!r.done()) throw IndexError("trailing bytes in index file");
    return index;
}

std::vector<CatalogItem> parse_catalog(std::string_view jsonl) {
    std::vector<CatalogItem> items;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < jsonl.size()) {
        auto nl = jsonl.find('\n', pos);
        if (nl == std::string_view::npos) nl = jsonl.size();
        const auto line = jsonl.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        auto doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object() || !doc.contains("item_id") || !doc.contains("title")) {
            throw IndexError("catalog line " + std::to_string(line_no) + ": expected an object with item_id and title");
        }
        CatalogItem item;
        item.item_id = doc["item_id"].is_string() ? doc["item_id"].get<std::string>() : doc["item_id"].dump();
        item.title = doc["title"].get<std::string>();
        item.brand = doc.value("brand", "");
        item.category = doc.value("category", "");
        if (trim(item.title).empty()) throw IndexError("catalog line " + std::to_string(line_no) + ": empty title");
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<CatalogItem> load_catalog(const std::filesystem::path& path) { return parse_catalog(read_file(path)); }

KnnIndex build_index(const std::vector<CatalogItem>& catalog, const EmbeddingProvider& provider, IndexMode mode,
                     HnswParams params) {
    if (catalog.empty()) throw IndexError("cannot build an index over an empty catalog");
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        if (!seen.emplace(catalog[i].item_id, i).second) {
            throw IndexError("duplicate item_id '" + catalog[i].item_id + "' in catalog");
        }
    }
    std::vector<std::string> titles;
    titles.reserve(catalog.size());
    for (const auto& item : catalog) titles.push_back(item.title);

    std::vector<EmbeddingVector> vectors;
    try {
        vectors = provider.embed_batch(titles);
    } catch (const EmbeddingError&) {
        // locate the offending item for the message
        for (const auto& item : catalog) {
            try {
                provider.embed(item.title);
            } catch (const EmbeddingError& e) {
                throw IndexError("embedding item '" + item.item_id + "': " + e.what());
            }
        }
        throw;
    }
    KnnIndex index(provider.dimension(), mode, params);
    for (std::size_t i = 0; i < catalog.size(); ++i) index.add(catalog[i].item_id, vectors[i]);
    return index;
}

}  // namespace pkgforge
