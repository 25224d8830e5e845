#include <doctest.h>

#include <httplib.h>
#include <json.hpp>

#include "pkgforge/server.h"
#include "pkgforge/util.h"
#include "support.h"

using namespace pkgforge;
using nlohmann::json;

namespace {

std::shared_ptr<const ServingCache> small_cache(std::size_t items, std::int64_t ts) {
    KnowledgeGraph g;
    for (std::size_t i = 0; i < items; ++i) g.upsert_product({"A" + std::to_string(i), "Item", "", "", {}, false});
    add_self_loops(g);
    return std::make_shared<const ServingCache>(compile_cache(g, ts));
}

ServerOptions ephemeral() {
    ServerOptions o;
    o.port = 0;
    o.worker_threads = 4;
    return o;
}

}  // namespace

TEST_CASE("http endpoints") {
    auto cache = small_cache(3, 100);
    ServerOptions opts = ephemeral();
    opts.latest_report_json = R"({"iteration":0,"average_edge_score":8.5})";
    RecommendationServer server(cache, opts);
    const int port = server.bind();
    REQUIRE(port > 0);
    server.start();
    httplib::Client cli("127.0.0.1", port);

    auto r = cli.Get("/recs/item/UNKNOWN?k=6");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(json::parse(r->body)["fallback"] == true);
    CHECK(r->get_header_value("Cache-Control") == "no-store");

    r = cli.Get("/recs/item/A0?k=6");
    REQUIRE(r);
    auto body = json::parse(r->body);
    CHECK(body["fallback"] == false);
    CHECK(body["items"][0]["rationale"] == "Same Product");
    CHECK(body["snapshot"] == cache->snapshot_hash());

    CHECK(cli.Get("/recs/item/A0")->status == 200);
    CHECK(cli.Get("/recs/item/A0?k=0")->status == 400);
    CHECK(cli.Get("/recs/item/A0?k=abc")->status == 400);
    CHECK(cli.Get("/recs/item/A0?k=-3")->status == 400);
    CHECK(cli.Get("/recs/group/nobody?k=2")->status == 200);
    r = cli.Get("/nowhere");
    CHECK(r->status == 404);
    CHECK(json::parse(r->body).contains("error"));

    r = cli.Get("/health");
    REQUIRE(r);
    CHECK(r->status == 200);
    body = json::parse(r->body);
    CHECK(body["build_metadata"]["entry_count"] == 3);
    CHECK(body["build_metadata"]["build_timestamp"] == 100);

    r = cli.Get("/stats");
    body = json::parse(r->body);
    CHECK(body["item_entries"] == 3);
    CHECK(body["latest_validation_report"]["average_edge_score"] == 8.5);
    server.stop();
}

TEST_CASE("reload keeps the old snapshot on failure") {
    testsupport::TempDir dir;
    RecommendationServer server(small_cache(3, 100), ephemeral());
    const int port = server.bind();
    server.start();
    httplib::Client cli("127.0.0.1", port);

    write_file_atomic(dir / "bad.bin", "PKGCACHE garbage");
    CHECK(server.reload_cache(dir / "bad.bin").has_value());
    CHECK(server.reload_cache(dir / "missing.bin").has_value());
    auto body = json::parse(cli.Get("/health")->body);
    CHECK(body["build_metadata"]["entry_count"] == 3);
    CHECK(json::parse(cli.Get("/recs/item/A1?k=2")->body)["fallback"] == false);

    const auto next = small_cache(5, 200);
    next->save(dir / "good.bin");
    CHECK_FALSE(server.reload_cache(dir / "good.bin").has_value());
    body = json::parse(cli.Get("/health")->body);
    CHECK(body["build_metadata"]["entry_count"] == 5);
    CHECK(body["build_metadata"]["snapshot"] == next->snapshot_hash());
    server.stop();
}
