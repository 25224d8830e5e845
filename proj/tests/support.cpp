#include "support.h"

#include "corpus.h"
#include "pkgforge/pipeline.h"
#include "pkgforge/util.h"

#include <atomic>
#include <chrono>
#include <map>
#include <vector>

namespace testsupport {

namespace fs = std::filesystem;

fs::path data_path(const std::string& name) { return fs::path(PKGFORGE_TEST_DATA) / name; }

TempDir::TempDir(const std::string& prefix) {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            (prefix + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

namespace {

const char* const kAwkward[] = {"\"quoted\"", "back\\slash", "comma, here", "tab\there", "caf\xc3\xa9",
                                "\xe6\x97\xa5\xe6\x9c\xac", "angle <b>", "50% off", "semi;colon"};

std::string word(std::mt19937_64& rng, bool awkward) {
    if (awkward && rng() % 4 == 0) return kAwkward[rng() % std::size(kAwkward)];
    static const char* const words[] = {"air", "max", "retro", "classic", "low", "high", "runner", "court",
                                        "suede", "canvas", "boost", "trail", "street", "vintage", "pro"};
    return words[rng() % std::size(words)];
}

}  // namespace

pkgforge::KnowledgeGraph random_graph(std::mt19937_64& rng, const RandomGraphOptions& o) {
    using namespace pkgforge;
    KnowledgeGraph g;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < o.nodes; ++i) {
        ProductNode n;
        n.node_id = "p" + std::to_string(i);
        n.title = word(rng, o.awkward_text) + " " + word(rng, o.awkward_text) + " " + std::to_string(i);
        n.brand = rng() % 3 == 0 ? "" : "brand" + std::to_string(rng() % 10);
        n.product_type = rng() % 2 ? "Sneakers" : "";
        n.is_seed = std::uniform_real_distribution<double>(0, 1)(rng) < o.seed_fraction;
        if (o.groups > 0 && rng() % 2) n.audience.push_back("Group " + std::to_string(rng() % o.groups));
        g.upsert_product(n);
        ids.push_back(n.node_id);
    }
    for (const auto& [id, node] : std::map<std::string, ProductNode>(g.products().begin(), g.products().end())) {
        for (const auto& label : node.audience) {
            const std::string gid = "g:" + label;
            g.add_group({gid, label});
            g.add_audience_edge(gid, id);
        }
    }
    std::uniform_real_distribution<double> unit(0, 1);
    std::size_t attempts = 0;
    while (g.edge_count() < o.edges && attempts++ < o.edges * 20) {
        const bool loop = unit(rng) < o.loop_fraction;
        const auto& s = ids[rng() % ids.size()];
        const auto& t = loop ? s : ids[rng() % ids.size()];
        if (!loop && s == t) continue;
        Edge e = loop ? make_edge(s, std::string(kSelfLoopPredicate), t, EdgeSource::SelfLoop)
                      : make_edge(s, word(rng, o.awkward_text) + " " + word(rng, o.awkward_text), t);
        if (!loop && unit(rng) < o.scored_fraction) {
            e.score = 1 + static_cast<int>(rng() % 10);
            e.rationale_accurate = rng() % 2 == 0;
        }
        g.add_edge(e);
    }
    return g;
}

PipelineRun run_corpus_pipeline(const fs::path& dir, std::size_t seeds) {
    pkgforge::corpus::CorpusOptions opts;
    opts.seed_count = seeds;
    pkgforge::corpus::write_sneaker_corpus(dir, opts);
    const auto config = pkgforge::load_config(dir / "config.json");
    PipelineRun run;
    for (auto* cmd : {&pkgforge::cmd_generate, &pkgforge::cmd_validate, &pkgforge::cmd_map, &pkgforge::cmd_compile}) {
        const auto r = (*cmd)(config, {});
        run.exit_codes.push_back(r.exit_code);
        run.summaries.push_back(r.summary);
    }
    run.out_dir = config.output_dir;
    run.cache_bytes = pkgforge::read_file(config.output_dir / pkgforge::artifacts::kCache);
    return run;
}

}  // namespace testsupport
