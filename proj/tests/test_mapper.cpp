#include <doctest.h>

#include <random>
#include <set>

#include <json.hpp>

#include "pkgforge/mapper.h"
#include "support.h"

using namespace pkgforge;

namespace {

const std::string kWallet = "Louis Vuitton Damier Graphite Multiple Wallet";

std::vector<CatalogItem> wallet_catalog() {
    return {{"LV-1", kWallet + " - Black", "Louis Vuitton", "Wallets"},
            {"LV-2", "Louis Vuitton Keepall Bandouliere 55", "Louis Vuitton", "Bags"},
            {"GU-1", "Gucci GG Marmont Card Case", "Gucci", "Wallets"},
            {"NK-1", "Nike Air Max 90 Infrared", "Nike", "Sneakers"},
            {"AC-1", "Leather Conditioner Spray", "Generic", "Care"}};
}

MappingResult mapped(const std::string& node, std::vector<std::string> items) {
    MappingResult r{node, {}, true};
    for (auto& i : items) r.matches.push_back({i, 0.9});
    return r;
}

}  // namespace

TEST_CASE("worked wallet example maps to the black variant") {
    KnowledgeGraph g;
    g.upsert_product({"w", kWallet, "", "", {}, true});
    HashingEmbedder e;
    for (auto mode : {IndexMode::Exact, IndexMode::Approximate}) {
        const auto index = build_index(wallet_catalog(), e, mode);
        const auto r = map_nodes(g, index, e);
        REQUIRE(r.size() == 1);
        CHECK(r[0].mapped);
        REQUIRE_FALSE(r[0].matches.empty());
        CHECK(r[0].matches[0].item_id == "LV-1");
        CHECK(r[0].matches[0].similarity >= kDefaultMappingThreshold);
    }
}

TEST_CASE("exact title maps with similarity one") {
    const auto catalog = wallet_catalog();
    HashingEmbedder e;
    const auto index = build_index(catalog, e);
    KnowledgeGraph g;
    for (const auto& item : catalog) g.upsert_product({"n-" + item.item_id, item.title, "", "", {}, false});
    for (const auto& r : map_nodes(g, index, e, kDefaultMappingThreshold, 1)) {
        REQUIRE(r.matches.size() == 1);
        CHECK(r.matches[0].item_id == r.node_id.substr(2));
        CHECK(r.matches[0].similarity == doctest::Approx(1.0));
    }
}

TEST_CASE("threshold above one leaves everything unmapped with an audit candidate") {
    HashingEmbedder e;
    const auto index = build_index(wallet_catalog(), e);
    KnowledgeGraph g;
    g.upsert_product({"w", kWallet + " - Black", "", "", {}, true});
    const auto r = map_nodes(g, index, e, 1.01);
    CHECK_FALSE(r[0].mapped);
    REQUIRE(r[0].matches.size() == 1);
    CHECK(r[0].matches[0].item_id == "LV-1");
    const auto audit = nlohmann::json::parse(unmapped_audit_jsonl(g, r));
    CHECK(audit["node_id"] == "w");
    CHECK(audit["best_item_id"] == "LV-1");

    const auto fused = fuse_graph(g, r, wallet_catalog());
    CHECK(fused.product_count() == 0);
    CHECK_THROWS_AS(map_nodes(g, index, e, 0.5, 0), MappingError);
}

TEST_CASE("edges expand over the cartesian product") {
    KnowledgeGraph g;
    g.upsert_product({"a", "A", "", "", {"Runners"}, true});
    g.upsert_product({"b", "B", "", "", {}, false});
    g.add_group({"g:runners", "Runners"});
    g.add_audience_edge("g:runners", "a");
    auto e = make_edge("a", "Pairs well", "b");
    e.score = 7;
    g.add_edge(e);
    std::vector<CatalogItem> catalog;
    for (const char* id : {"a1", "a2", "b1", "b2", "b3"}) catalog.push_back({id, std::string("Item ") + id, "", ""});
    const auto fused = fuse_graph(g, {mapped("a", {"a1", "a2"}), mapped("b", {"b1", "b2", "b3"})}, catalog);
    CHECK(fused.product_count() == 5);
    CHECK(fused.edge_count() == 6);
    for (const auto& [k, edge] : fused.edges()) {
        CHECK(edge.score == 7);
        CHECK(edge.predicate == "Pairs well");
    }
    CHECK(fused.audience_edges().size() == 2);
    CHECK(fused.find_product("a1")->is_seed);
    CHECK(fused.find_product("b1")->title == "Item b1");
    CHECK(fused.integrity_problems().empty());
}

TEST_CASE("fusion agrees with a set-comprehension oracle") {
    std::mt19937_64 rng(41);
    testsupport::RandomGraphOptions o;
    o.nodes = 150;
    o.edges = 500;
    o.loop_fraction = 0.3;
    o.scored_fraction = 0.5;
    auto g = testsupport::random_graph(rng, o);
    std::vector<CatalogItem> catalog;
    for (int i = 0; i < 120; ++i) catalog.push_back({"c" + std::to_string(i), "Catalog " + std::to_string(i), "", ""});

    std::map<std::string, std::vector<std::string>> items;
    std::vector<MappingResult> mappings;
    for (const auto& [id, node] : g.products()) {
        if (rng() % 5 == 0) {
            mappings.push_back({id, {{"c0", 0.1}}, false});
            continue;
        }
        std::set<std::string> picked;
        const auto n = 1 + rng() % 3;
        while (picked.size() < n) picked.insert("c" + std::to_string(rng() % catalog.size()));
        items[id] = {picked.begin(), picked.end()};
        mappings.push_back(mapped(id, items[id]));
    }
    const auto fused = fuse_graph(g, mappings, catalog);

    std::set<EdgeKey> expected;
    for (const auto& [k, e] : g.edges()) {
        if (!items.contains(e.subject_id) || !items.contains(e.object_id)) continue;
        for (const auto& s : items[e.subject_id]) {
            for (const auto& t : items[e.object_id]) {
                if (s != t || e.source == EdgeSource::SelfLoop) expected.insert(EdgeKey(s, e.predicate, t));
            }
        }
    }
    std::set<EdgeKey> actual;
    for (const auto& [k, e] : fused.edges()) actual.insert(k);
    CHECK(actual == expected);

    std::set<std::string> expected_nodes;
    for (const auto& [id, list] : items) expected_nodes.insert(list.begin(), list.end());
    std::set<std::string> actual_nodes;
    for (const auto& [id, n] : fused.products()) actual_nodes.insert(id);
    CHECK(actual_nodes == expected_nodes);
    CHECK(fused.integrity_problems().empty());
}

TEST_CASE("duplicate expansions keep the highest score") {
    KnowledgeGraph g;
    for (const char* id : {"a", "b", "c"}) g.upsert_product({id, id, "", "", {}, false});
    auto e1 = make_edge("a", "Same vibe", "b");
    e1.score = 6;
    auto e2 = make_edge("a", "Same vibe", "c");
    e2.score = 9;
    g.add_edge(e1);
    g.add_edge(e2);
    std::vector<CatalogItem> catalog{{"x", "X", "", ""}, {"y", "Y", "", ""}};
    const auto fused = fuse_graph(g, {mapped("a", {"x"}), mapped("b", {"y"}), mapped("c", {"y"})}, catalog);
    REQUIRE(fused.edge_count() == 1);
    CHECK(fused.edges().begin()->second.score == 9);
}

TEST_CASE("fusion errors") {
    KnowledgeGraph g;
    g.upsert_product({"a", "A", "", "", {}, false});
    g.upsert_product({"b", "B", "", "", {}, false});
    std::vector<CatalogItem> catalog{{"x", "X", "", ""}};
    CHECK_THROWS_AS(fuse_graph(g, {mapped("a", {"x"})}, catalog), MappingError);
    CHECK_THROWS_AS(fuse_graph(g, {mapped("a", {"x"}), mapped("b", {"zz"})}, catalog), MappingError);
}
