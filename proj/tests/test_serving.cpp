#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include <json.hpp>

#include "pkgforge/graph_io.h"
#include "pkgforge/serving.h"
#include "pkgforge/util.h"
#include "support.h"

using namespace pkgforge;

namespace {

KnowledgeGraph items_graph(std::size_t n) {
    KnowledgeGraph g;
    for (std::size_t i = 0; i < n; ++i) {
        g.upsert_product({"i" + std::to_string(i), "Item " + std::to_string(i), "Brand", "", {}, false});
    }
    return g;
}

Edge scored(const std::string& s, const std::string& p, const std::string& o, std::optional<int> score) {
    auto e = make_edge(s, p, o);
    e.score = score;
    return e;
}

}  // namespace

TEST_CASE("single directed edge") {
    auto g = items_graph(2);
    g.add_edge(make_edge("i0", "similar style", "i1"));
    const auto cache = compile_cache(g, 0);
    const auto* a = cache.find(EntryKind::Item, "i0");
    REQUIRE(a);
    REQUIRE(a->neighbors.size() == 1);
    CHECK(a->neighbors[0].item_id == "i1");
    CHECK(a->neighbors[0].predicate == "similar style");
    CHECK(cache.find(EntryKind::Item, "i1") == nullptr);
    CHECK(lookup_item(cache, "i1", 6).fallback);
}

TEST_CASE("self loops surface the item itself as Same Product") {
    auto g = items_graph(5);
    g.add_edge(scored("i0", "Similar vibe", "i1", 9));
    add_self_loops(g);
    const auto cache = compile_cache(g, 0);
    CHECK(cache.metadata().item_entry_count == 5);
    for (const auto& [key, entry] : cache.item_entries()) {
        const auto it = std::find_if(entry.neighbors.begin(), entry.neighbors.end(),
                                     [&](const CacheNeighbor& n) { return n.item_id == key; });
        REQUIRE(it != entry.neighbors.end());
        CHECK(it->predicate == "Same Product");
    }
    const auto r = lookup_item(cache, "i0", 6);
    REQUIRE(r.items.size() == 2);
    CHECK(r.items[0].item_id == "i1");  // scored before the unscored loop
    CHECK(r.items[1].rationale == "Same Product");
    CHECK(r.items[1].title == "Item 0");
}

TEST_CASE("entries match a naive adjacency oracle") {
    std::mt19937_64 rng(7);
    testsupport::RandomGraphOptions o;
    o.nodes = 300;
    o.edges = 1000;
    o.scored_fraction = 0.6;
    o.loop_fraction = 0.2;
    const auto g = testsupport::random_graph(rng, o);
    const auto cache = compile_cache(g, 0);

    struct Cand {
        std::string item;
        std::string lower_pred;
        std::string pred;
        std::optional<int> score;
    };
    std::map<std::string, std::vector<Cand>> adj;
    for (const auto& [k, e] : g.edges()) adj[e.subject_id].push_back({e.object_id, k.predicate, e.predicate, e.score});
    CHECK(cache.item_entries().size() == adj.size());
    for (auto& [subject, cands] : adj) {
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            const int sa = a.score.value_or(0), sb = b.score.value_or(0);
            if (sa != sb) return sa > sb;
            if (a.item != b.item) return a.item < b.item;
            return a.lower_pred < b.lower_pred;
        });
        std::vector<Cand> want;
        std::set<std::string> seen;
        for (const auto& c : cands) {
            if (seen.insert(c.item).second) want.push_back(c);
        }
        const auto* entry = cache.find(EntryKind::Item, subject);
        REQUIRE(entry);
        REQUIRE(entry->neighbors.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) {
            CHECK(entry->neighbors[i].item_id == want[i].item);
            CHECK(entry->neighbors[i].predicate == want[i].pred);
            CHECK(entry->neighbors[i].score == want[i].score);
        }
    }
    std::size_t expected_groups = 0;
    std::map<std::string, std::size_t> attached;
    for (const auto& a : g.audience_edges()) ++attached[a.group_id];
    expected_groups = attached.size();
    CHECK(cache.group_entries().size() == expected_groups);
    for (const auto& [gid, n] : attached) CHECK(cache.find(EntryKind::Group, gid)->neighbors.size() == n);
}

TEST_CASE("truncation and exhaustion") {
    auto g = items_graph(12);
    for (int i = 1; i <= 11; ++i) g.add_edge(scored("i0", "reason " + std::to_string(i), "i" + std::to_string(i), 1 + i % 10));
    const auto cache = compile_cache(g, 0);
    const auto six = lookup_item(cache, "i0", 6);
    CHECK_FALSE(six.fallback);
    REQUIRE(six.items.size() == 6);
    for (std::size_t i = 1; i < six.items.size(); ++i) CHECK(*six.items[i - 1].score >= *six.items[i].score);
    CHECK(six.items[0].score == 10);
    CHECK(lookup_item(cache, "i0", 50).items.size() == 11);
    const auto unknown = lookup_item(cache, "nope", 6);
    CHECK(unknown.fallback);
    CHECK(unknown.items.empty());
    CHECK_THROWS_AS(lookup_item(cache, "i0", 0), CacheError);
}

TEST_CASE("group lookups") {
    auto g = items_graph(4);
    g.add_group({"sneakerheads", "Sneakerheads"});
    for (const char* id : {"i3", "i1", "i2"}) g.add_audience_edge("sneakerheads", id);
    const auto cache = compile_cache(g, 0);
    const auto r = lookup_group(cache, "sneakerheads", 5);
    CHECK_FALSE(r.fallback);
    REQUIRE(r.items.size() == 3);
    CHECK(r.items[0].rationale == "audience match");
    // oracle: full sort of the attachments
    CHECK(lookup_group(cache, "sneakerheads", 1).items.at(0).item_id == "i1");
    CHECK(lookup_group(cache, "lurkers", 5).fallback);
}

TEST_CASE("cache round trip and determinism") {
    std::mt19937_64 rng(9);
    testsupport::RandomGraphOptions o;
    o.nodes = 200;
    o.edges = 700;
    o.scored_fraction = 0.5;
    o.awkward_text = true;
    const auto g = testsupport::random_graph(rng, o);
    const auto cache = compile_cache(g, 1700000000);
    const auto bytes = cache.serialize();
    CHECK(compile_cache(g, 1700000000).serialize() == bytes);
    const auto back = ServingCache::deserialize(bytes);
    CHECK(back.serialize() == bytes);
    CHECK(back.snapshot_hash() == cache.snapshot_hash());
    CHECK(back.metadata().source_graph_hash == graph_hash(g));
    CHECK(back.metadata().build_timestamp == 1700000000);
    CHECK(back.item_entries() == cache.item_entries());
    CHECK(back.group_entries() == cache.group_entries());
    CHECK(back.item_table() == cache.item_table());
    CHECK(cache_debug_jsonl(back) == cache_debug_jsonl(cache));

    testsupport::TempDir dir;
    cache.save(dir / "cache.bin");
    CHECK(ServingCache::load(dir / "cache.bin").snapshot_hash() == cache.snapshot_hash());
}

TEST_CASE("corrupt caches are rejected") {
    auto g = items_graph(3);
    g.add_edge(make_edge("i0", "x", "i1"));
    const auto bytes = compile_cache(g, 0).serialize();
    CHECK_THROWS_AS(ServingCache::deserialize(""), CacheError);
    CHECK_THROWS_AS(ServingCache::deserialize(bytes.substr(0, bytes.size() - 3)), CacheError);
    auto flipped = bytes;
    flipped[flipped.size() - 5] ^= 0x40;
    CHECK_THROWS_AS(ServingCache::deserialize(flipped), CacheError);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(ServingCache::deserialize(magic), CacheError);
}

TEST_CASE("response json carries the snapshot") {
    auto g = items_graph(2);
    g.add_edge(scored("i0", "Similar \"quoted\" style", "i1", 7));
    const auto cache = compile_cache(g, 0);
    const auto j = nlohmann::json::parse(response_to_json(lookup_item(cache, "i0", 6), cache.snapshot_hash()));
    CHECK(j["seed_key"] == "i0");
    CHECK(j["fallback"] == false);
    CHECK(j["items"][0]["rationale"] == "Similar \"quoted\" style");
    CHECK(j["items"][0]["score"] == 7);
    CHECK(j["snapshot"] == cache.snapshot_hash());
}
