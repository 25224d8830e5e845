#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "pkgforge/graph_io.h"
#include "pkgforge/pipeline.h"
#include "pkgforge/util.h"
#include "support.h"

using namespace pkgforge;
using testsupport::TempDir;

namespace {

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

}  // namespace

TEST_CASE("config parsing resolves paths and applies defaults") {
    const auto c = parse_config(R"({
        "seeds": "in/seeds.jsonl", "catalog": "/abs/catalog.jsonl",
        "gateway": {"mode": "replay", "fixtures_dir": "fx", "max_in_flight": 8},
        "generation": {"k": 7},
        "validation": {"prune_threshold": 5, "min_avg_score": 7.5},
        "mapping": {"threshold": 0.8, "index_mode": "approximate"},
        "serving": {"port": 9000}
    })", "/base");
    CHECK(c.seeds_path == "/base/in/seeds.jsonl");
    CHECK(c.catalog_path == "/abs/catalog.jsonl");
    CHECK(c.output_dir == "/base/out");
    CHECK(c.gateway.fixtures_dir == "/base/fx");
    CHECK(c.gateway.max_in_flight == 8);
    CHECK(c.generation.k == 7);
    CHECK(c.generation.temperature == 0.2);
    CHECK(c.validation.prune_threshold == 5);
    CHECK(c.validation.targets.min_avg_score == 7.5);
    CHECK(c.mapping.threshold == 0.8);
    CHECK(c.mapping.index_mode == IndexMode::Approximate);
    CHECK(c.serving.port == 9000);
    CHECK(c.serving.default_k == 6);

    CHECK_THROWS_AS(parse_config("not json"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"generation": {"k": 0}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"gateway": {"mode": "psychic"}})"), ConfigError);
}

TEST_CASE("golden single-seed generation through replay") {
    TempDir dir;
    write_file_atomic(dir / "seeds.jsonl",
                      "{\"id\": \"s1\", \"title\": \"Jordan 1 Retro OG High UNC Toe University Blue\"}\n");
    const auto tmpl = default_generation_template();
    const auto prompt = render_generation_prompt(tmpl, {"s1", "Jordan 1 Retro OG High UNC Toe University Blue"}, 5);
    write_fixture(dir / "fixtures", make_request(prompt.text, 0.2, 1024),
                  read_file(testsupport::data_path("generation_output.json")));
    write_file_atomic(dir / "config.json",
                      R"({"seeds": "seeds.jsonl", "gateway": {"mode": "replay", "fixtures_dir": "fixtures"}})");
    const auto config = load_config(dir / "config.json");
    const auto r = cmd_generate(config);
    CHECK(r.exit_code == kExitOk);
    CHECK(r.summary.find("nodes=6 edges=5") != std::string::npos);
    const auto g = import_graph(config.output_dir / artifacts::kInitialGraph, GraphFormat::JsonLines);
    CHECK(g.product_count() == 6);
    CHECK(g.edge_count() == 5);
    CHECK(read_file(config.output_dir / artifacts::kGenerateReport).empty());
}

TEST_CASE("missing fixture marks the seed failed with exit code 2") {
    TempDir dir;
    write_file_atomic(dir / "seeds.jsonl", "{\"id\": \"s1\", \"title\": \"Mystery Shoe\"}\n");
    write_file_atomic(dir / "config.json",
                      R"({"seeds": "seeds.jsonl", "gateway": {"mode": "replay", "fixtures_dir": "fixtures"}})");
    std::filesystem::create_directories(dir / "fixtures");
    const auto r = cmd_generate(load_config(dir / "config.json"));
    CHECK(r.exit_code == kExitPartial);
    const auto report = read_file(dir / "out" / std::string(artifacts::kGenerateReport));
    const auto line = nlohmann::json::parse(report);
    CHECK(line["seed_id"] == "s1");
    CHECK(line["stage"] == "failed");
}

TEST_CASE("zero seeds produce an empty graph") {
    TempDir dir;
    write_file_atomic(dir / "seeds.jsonl", "");
    write_file_atomic(dir / "config.json",
                      R"({"seeds": "seeds.jsonl", "gateway": {"mode": "replay", "fixtures_dir": "fixtures"}})");
    const auto r = cmd_generate(load_config(dir / "config.json"));
    CHECK(r.exit_code == kExitOk);
    CHECK(r.summary.find("nodes=0 edges=0") != std::string::npos);
}

TEST_CASE("corpus pipeline runs end to end and is deterministic") {
    setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
    TempDir a;
    TempDir b;
    const auto first = testsupport::run_corpus_pipeline(a.path(), 12);
    const auto second = testsupport::run_corpus_pipeline(b.path(), 12);
    for (int code : first.exit_codes) CHECK(code == kExitOk);
    CHECK(first.cache_bytes == second.cache_bytes);
    const auto fused = import_graph(first.out_dir / artifacts::kFusedGraph, GraphFormat::JsonLines);
    CHECK(fused.product_count() > 0);
    CHECK(fused.integrity_problems().empty());
    const auto reports = read_file(first.out_dir / artifacts::kValidationReports);
    CHECK(count_lines(reports) >= 1);

    // stats table after a full run
    const auto config = load_config(a / "config.json");
    const auto stats = cmd_stats(config);
    CHECK(stats.exit_code == kExitOk);
    CHECK(stats.summary.find("n/a") == std::string::npos);

    // the generate failures report lists the recovered seeds
    const auto failures = read_file(first.out_dir / artifacts::kGenerateReport);
    CHECK(failures.find("\"reasked\"") != std::string::npos);
    CHECK(failures.find("\"extracted\"") != std::string::npos);

    // export does not clobber its input
    CommandArgs args;
    args.in = first.out_dir / artifacts::kFusedGraph;
    args.format = "ntriples";
    CHECK(cmd_export(config, args).exit_code == kExitOk);
    CHECK(import_graph(first.out_dir / artifacts::kFusedGraph, GraphFormat::JsonLines) == fused);
}

TEST_CASE("stats table columns") {
    KnowledgeGraph initial;
    initial.upsert_product({"a", "A", "", "", {"Fans"}, true});
    initial.upsert_product({"b", "B", "", "", {}, false});
    initial.add_group({"g:fans", "Fans"});
    initial.add_audience_edge("g:fans", "a");
    initial.add_edge(make_edge("a", "x", "b"));
    ValidationReport first;
    first.average_edge_score = 8.57;
    first.relation_imprecise_rate = 0.2786;
    const auto stats = collect_stats(initial, first, std::nullopt);
    CHECK(stats.nodes == 3);
    CHECK(stats.edges == 2);
    const auto table = format_stats_table(stats);
    std::istringstream in(table);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    std::string expected_header;
    for (auto c : kStatsColumns) expected_header += (expected_header.empty() ? "" : "\t") + std::string(c);
    CHECK(header == expected_header);
    CHECK(row.find("n/a") != std::string::npos);
    CHECK(row.rfind("3\t2\t", 0) == 0);
}
