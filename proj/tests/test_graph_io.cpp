#include <doctest.h>

#include <random>
#include <sstream>

#include "pkgforge/graph_io.h"
#include "pkgforge/graph_parse.h"
#include "pkgforge/util.h"
#include "support.h"

using namespace pkgforge;
using testsupport::TempDir;

namespace {

KnowledgeGraph golden_graph() {
    auto o = parse_generation_response(read_file(testsupport::data_path("generation_output.json")),
                                       {"s1", "Jordan 1 Retro OG High UNC Toe University Blue"});
    REQUIRE(o.ok());
    return *o.subgraph;
}

std::size_t line_count(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

}  // namespace

TEST_CASE("jsonlines round trip of the worked graph") {
    const auto g = golden_graph();
    const auto text = to_jsonlines(g);
    CHECK(text.starts_with("{\"format\":\"pkgforge-graph\",\"version\":1}\n"));
    CHECK(from_jsonlines(text) == g);
    CHECK(to_jsonlines(from_jsonlines(text)) == text);
}

TEST_CASE("single edge ntriples") {
    KnowledgeGraph g;
    g.upsert_product({"a", "", "", "", {}, false});
    g.upsert_product({"b", "", "", "", {}, false});
    g.add_edge(make_edge("a", "similar style", "b"));
    const auto nt = to_ntriples(g);
    std::istringstream in(nt);
    std::string line;
    std::size_t edge_lines = 0;
    while (std::getline(in, line)) {
        if (line.find("rel:") != std::string::npos) {
            ++edge_lines;
            CHECK(line.ends_with(" ."));
            CHECK(line.find("similar%20style") != std::string::npos);
        }
    }
    CHECK(edge_lines == 1);
    CHECK(from_ntriples(nt) == g);
}

TEST_CASE("round trips with awkward text, scores and loops") {
    std::mt19937_64 rng(5);
    testsupport::RandomGraphOptions o;
    o.nodes = 200;
    o.edges = 800;
    o.scored_fraction = 0.5;
    o.loop_fraction = 0.1;
    o.awkward_text = true;
    const auto g = testsupport::random_graph(rng, o);
    CHECK(from_jsonlines(to_jsonlines(g)) == g);
    CHECK(from_ntriples(to_ntriples(g)) == g);

    TempDir dir;
    for (auto f : {GraphFormat::JsonLines, GraphFormat::NTriples}) {
        const auto p = dir / ("g." + std::string(to_string(f)));
        export_graph(g, f, p);
        CHECK(import_graph(p, f) == g);
    }
}

TEST_CASE("viz csv carries nodes and edges") {
    const auto g = golden_graph();
    const auto csv = to_viz_csv(g);
    CHECK(csv.nodes.starts_with("id,title,brand,type,is_seed\n"));
    CHECK(csv.edges.starts_with("subject,predicate,object,score,source\n"));
    CHECK(line_count(csv.nodes) == 7);
    CHECK(line_count(csv.edges) == 6);
    const auto back = from_viz_csv(csv.nodes, csv.edges);
    CHECK(back.product_count() == 6);
    CHECK(back.edge_count() == 5);
    for (const auto& [k, e] : g.edges()) CHECK(back.find_edge(k) != nullptr);

    TempDir dir;
    export_graph(g, GraphFormat::VizCsv, dir / "viz");
    CHECK(std::filesystem::exists(dir / "viz" / "nodes.csv"));
    CHECK(import_graph(dir / "viz", GraphFormat::VizCsv).edge_count() == 5);
}

TEST_CASE("malformed lines report their line number") {
    const auto text = to_jsonlines(golden_graph());
    auto broken = text;
    const auto third = broken.find('\n', broken.find('\n') + 1);
    broken.insert(third + 1, "{not json}\n");
    try {
        from_jsonlines(broken);
        FAIL("expected a format error");
    } catch (const GraphFormatError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(from_jsonlines("{\"format\":\"other\",\"version\":1}\n"), GraphFormatError);
    CHECK_THROWS_AS(from_ntriples("<urn:pkgforge:product:a> <urn:pkgforge:rel:x>\n"), GraphFormatError);
    CHECK_THROWS_AS(import_graph("/nonexistent/graph.jsonl", GraphFormat::JsonLines), IoError);
}

TEST_CASE("percent encoding") {
    CHECK(percent_encode("a b/c") == "a%20b%2Fc");
    CHECK(percent_decode(percent_encode("caf\xc3\xa9 <x> 100%")) == "caf\xc3\xa9 <x> 100%");
    CHECK(percent_encode("Az09-._~") == "Az09-._~");
}

TEST_CASE("graph hash tracks content") {
    auto g = golden_graph();
    const auto h = graph_hash(g);
    CHECK(graph_hash(from_jsonlines(to_jsonlines(g))) == h);
    add_self_loops(g);
    CHECK(graph_hash(g) != h);
}
