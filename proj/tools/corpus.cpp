#include "corpus.h"

#include <algorithm>
#include <array>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "pkgforge/gateway.h"
#include "pkgforge/graph_parse.h"
#include "pkgforge/pipeline.h"
#include "pkgforge/prompt.h"
#include "pkgforge/util.h"

namespace pkgforge::corpus {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Model {
    const char* brand;
    const char* name;
};

constexpr std::array<Model, 36> kModels = {{
    {"Nike", "Air Jordan 1 Retro High OG"}, {"Nike", "Air Force 1 Low"},  {"Nike", "Dunk Low"},
    {"Nike", "Air Max 90"},                 {"Nike", "Air Max 1"},        {"Nike", "Blazer Mid 77"},
    {"Nike", "Pegasus 40"},                 {"Nike", "Cortez"},           {"Adidas", "Samba OG"},
    {"Adidas", "Gazelle"},                  {"Adidas", "Superstar"},      {"Adidas", "Stan Smith"},
    {"Adidas", "Ultraboost 22"},            {"Adidas", "Forum Low"},      {"Adidas", "Yeezy Boost 350 V2"},
    {"New Balance", "550"},                 {"New Balance", "990v6"},     {"New Balance", "2002R"},
    {"New Balance", "574"},                 {"New Balance", "9060"},      {"Puma", "Suede Classic"},
    {"Puma", "Palermo"},                    {"Puma", "RS-X"},             {"Asics", "Gel-Kayano 14"},
    {"Asics", "Gel-Lyte III"},              {"Asics", "Gel-1130"},        {"Converse", "Chuck Taylor All Star"},
    {"Converse", "Chuck 70 High"},          {"Converse", "Run Star Hike"}, {"Vans", "Old Skool"},
    {"Vans", "Sk8-Hi"},                     {"Vans", "Authentic"},        {"Reebok", "Club C 85"},
    {"Reebok", "Classic Leather"},          {"Saucony", "Shadow 6000"},   {"Hoka", "Clifton 9"},
}};

constexpr std::array<const char*, 10> kColorways = {"Black White", "University Blue", "Triple White", "Panda",
                                                    "Grey Fog",    "Sail",            "Bred",         "Forest Green",
                                                    "Navy Gum",    "Cream"};

constexpr std::array<const char*, 10> kAudiences = {
    "Sneakerheads", "Streetwear enthusiasts", "Casual sneaker lovers", "Runners",   "Skaters",
    "Basketball fans", "Fashion-forward individuals", "Classic footwear fans", "Hypebeasts", "Budget shoppers"};

constexpr std::array<const char*, 12> kRationales = {
    "Classic colorway appeal",  "Similar brand loyalty",    "Hypebeast appeal",        "Classic sneaker style",
    "Collaboration hype",       "Same silhouette family",   "Complementary streetwear look", "Comfort for daily wear",
    "Retro basketball heritage", "Popular with sneakerheads", "Versatile everyday style", "Similar price range"};

constexpr std::array<const char*, 5> kAlternatives = {"Shared retro design", "Similar casual vibe",
                                                      "Popular streetwear staple", "Same brand lineup",
                                                      "Comparable comfort level"};

std::string seed_title(std::size_t i) {
    const auto& m = kModels[i % kModels.size()];
    const char* color = kColorways[(i * 3 + i / kModels.size()) % kColorways.size()];
    return std::string(m.brand) + " " + m.name + " " + color;
}

std::string rec_title(std::size_t model, std::size_t color) {
    const auto& m = kModels[model];
    return std::string(m.brand) + " " + m.name + " '" + kColorways[color] + "'";
}

ordered_json node_json(const std::string& title, const char* brand, std::mt19937_64& rng) {
    ordered_json n;
    n["product_title"] = title;
    n["brand"] = brand;
    n["type"] = "Sneakers";
    auto audience = ordered_json::array();
    const auto count = 1 + rng() % 3;
    const auto start = rng() % kAudiences.size();
    for (std::size_t a = 0; a < count; ++a) audience.push_back(kAudiences[(start + a * 3) % kAudiences.size()]);
    n["audience"] = std::move(audience);
    return n;
}

std::string judge_response(const std::string& rec, int score, bool accurate, const std::string& original,
                           const std::string& alternative, bool python_literals) {
    ordered_json reason;
    reason["original"] = original;
    reason["accurate"] = accurate;
    reason["alternative"] = accurate ? ordered_json(nullptr) : ordered_json(alternative);
    ordered_json body;
    body["acceptability_score"] = score;
    body["reason"] = std::move(reason);
    ordered_json doc;
    doc[rec] = std::move(body);
    std::string text = doc.dump(4);
    if (python_literals) {
        // mimic the judge's habit of answering in Python literals
        for (auto [from, to] : {std::pair<std::string, std::string>{": true", ": True"},
                                {": false", ": False"},
                                {": null", ": None"}}) {
            for (auto p = text.find(from); p != std::string::npos; p = text.find(from, p + to.size())) {
                text.replace(p, from.size(), to);
            }
        }
    }
    return text;
}

}  // namespace

CorpusSummary write_sneaker_corpus(const fs::path& dir, const CorpusOptions& options) {
    fs::create_directories(dir / "fixtures");
    const fs::path fixtures = dir / "fixtures";
    CorpusSummary summary;
    std::mt19937_64 rng(options.rng_seed);

    const GenerationConfig gen;
    const ValidationConfig val;
    const auto tmpl = default_generation_template();

    std::string seeds_jsonl;
    std::vector<SeedProduct> seeds;
    for (std::size_t i = 0; i < options.seed_count; ++i) {
        SeedProduct s{"S" + std::to_string(1000 + i), seed_title(i)};
        ordered_json line;
        line["id"] = s.id;
        line["title"] = s.title;
        seeds_jsonl += line.dump() + "\n";
        seeds.push_back(std::move(s));
    }
    write_file_atomic(dir / "seeds.jsonl", seeds_jsonl);

    KnowledgeGraph graph;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const auto& seed = seeds[i];
        ordered_json doc;
        auto nodes = ordered_json::array();
        auto edges = ordered_json::array();
        nodes.push_back(node_json(seed.title, kModels[i % kModels.size()].brand, rng));
        std::vector<std::size_t> used{i % kModels.size()};
        for (int r = 0; r < options.k; ++r) {
            std::size_t model = rng() % kModels.size();
            while (std::find(used.begin(), used.end(), model) != used.end()) model = (model + 1) % kModels.size();
            used.push_back(model);
            const auto title = rec_title(model, rng() % kColorways.size());
            nodes.push_back(node_json(title, kModels[model].brand, rng));
            ordered_json e;
            e["subject"] = seed.title;
            e["predicate"] = kRationales[rng() % kRationales.size()];
            e["object"] = title;
            edges.push_back(std::move(e));
        }
        doc["nodes"] = std::move(nodes);
        doc["edges"] = std::move(edges);
        const std::string clean = doc.dump(2);

        const auto prompt = render_generation_prompt(tmpl, seed, options.k);
        const auto req = make_request(prompt.text, gen.temperature, gen.max_output_tokens);
        std::string first = clean;
        if (i % 10 == 3) first = "Here is the knowledge graph you asked for:\n" + clean + "\nHope this helps!";
        if (i % 25 == 7) {
            first = "Sure! The seed product pairs well with several classic silhouettes.";
            const auto reask = make_request(prompt.text + "\n\n" + tmpl.format_indicator, gen.temperature,
                                            gen.max_output_tokens);
            write_fixture(fixtures, reask, clean);
            ++summary.fixtures;
        }
        write_fixture(fixtures, req, first);
        ++summary.fixtures;

        auto parsed = parse_generation_response(clean, seed);
        if (!parsed.ok()) throw std::runtime_error("corpus response failed to parse: " + parsed.error);
        merge_subgraph(graph, *parsed.subgraph);
    }

    // Judge fixtures for every triple, plus the rewritten triples later
    // iterations will ask about.
    for (const auto& [key, edge] : graph.edges()) {
        const auto* s = graph.find_product(edge.subject_id);
        const auto* o = graph.find_product(edge.object_id);
        const std::uint64_t h = fnv1a64(s->title + "|" + o->title + "|" + edge.predicate);
        const int score = 4 + static_cast<int>(h % 7);
        const bool accurate = (h >> 8) % 4 != 0;
        const std::string alt = kAlternatives[(h >> 16) % kAlternatives.size()];
        const bool python = (h >> 24) % 2 == 0;

        const auto prompt = render_validation_prompt(s->title, o->title, edge.predicate);
        write_fixture(fixtures, make_request(prompt.text, val.temperature, val.max_output_tokens),
                      judge_response(o->title, score, accurate, edge.predicate, alt, python));
        ++summary.fixtures;
        if (!accurate) {
            const auto again = render_validation_prompt(s->title, o->title, alt);
            write_fixture(fixtures, make_request(again.text, val.temperature, val.max_output_tokens),
                          judge_response(o->title, score, true, alt, "", python));
            ++summary.fixtures;
        }
    }

    // Catalog: colour variants of every product named above plus unrelated
    // accessories.
    std::string catalog;
    std::size_t sku = 10000;
    auto add_item = [&](const std::string& title, const std::string& brand, const std::string& category) {
        ordered_json line;
        line["item_id"] = "SKU-" + std::to_string(sku++);
        line["title"] = title;
        line["brand"] = brand;
        line["category"] = category;
        catalog += line.dump() + "\n";
        ++summary.catalog_items;
    };
    for (const auto& [id, node] : graph.products()) {
        std::string base;
        for (char c : node.title) {
            if (c != '\'') base.push_back(c);
        }
        const auto h = fnv1a64(id);
        add_item(base + " - Black", node.brand, "Sneakers");
        if (h % 3 == 0) add_item(base + " - White", node.brand, "Sneakers");
        if (h % 5 == 0) add_item(base + " - Size 10", node.brand, "Sneakers");
    }
    for (const char* acc : {"Sneaker Cleaning Kit", "Crew Socks 3 Pack", "Flat Waxed Laces 120cm", "Shoe Trees Cedar",
                            "Water Repellent Spray", "Heel Protector Inserts"}) {
        add_item(acc, "Generic", "Accessories");
    }
    write_file_atomic(dir / "catalog.jsonl", catalog);

    ordered_json config;
    config["seeds"] = "seeds.jsonl";
    config["catalog"] = "catalog.jsonl";
    config["output_dir"] = "out";
    config["gateway"] = {{"mode", "replay"}, {"fixtures_dir", "fixtures"}, {"max_in_flight", 4}};
    config["generation"] = {{"k", options.k}};
    write_file_atomic(dir / "config.json", config.dump(2) + "\n");

    summary.seeds = seeds.size();
    return summary;
}

}  // namespace pkgforge::corpus
