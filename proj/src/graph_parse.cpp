#include "pkgforge/graph_parse.h"

#include <json.hpp>

#include "pkgforge/util.h"

namespace pkgforge {

using json = nlohmann::json;

std::string_view to_string(ParseStage s) {
    switch (s) {
        case ParseStage::Strict: return "strict";
        case ParseStage::Extracted: return "extracted";
        case ParseStage::Reasked: return "reasked";
        case ParseStage::Failed: return "failed";
    }
    return "failed";
}

std::string product_id_for_title(std::string_view title) { return normalize_label(title); }

namespace {

std::string string_field(const json& obj, std::initializer_list<const char*> names) {
    for (const char* name : names) {
        auto it = obj.find(name);
        if (it != obj.end() && it->is_string()) return trim(it->get<std::string>());
    }
    return {};
}

// Builds the subgraph from an already-parsed document. Throws on shape errors.
KnowledgeGraph build_subgraph(const json& doc, const SeedProduct& seed, std::size_t& dropped) {
    if (!doc.is_object()) throw GraphError("response is not a JSON object");
    auto nodes_it = doc.find("nodes");
    if (nodes_it == doc.end() || !nodes_it->is_array()) throw GraphError("response has no \"nodes\" array");

    KnowledgeGraph g;
    const std::string seed_id = product_id_for_title(seed.title);

    auto ensure_product = [&](const std::string& title) -> std::string {
        auto id = product_id_for_title(title);
        if (id.empty()) return id;
        ProductNode n;
        n.node_id = id;
        n.title = title;
        g.upsert_product(n);
        return id;
    };

    for (const auto& item : *nodes_it) {
        if (!item.is_object()) continue;
        ProductNode n;
        n.title = string_field(item, {"product_title", "title", "name"});
        n.node_id = product_id_for_title(n.title);
        if (n.node_id.empty()) continue;
        n.brand = string_field(item, {"brand"});
        n.product_type = string_field(item, {"type", "product_type"});
        if (auto a = item.find("audience"); a != item.end()) {
            if (a->is_array()) {
                for (const auto& label : *a) {
                    if (label.is_string() && !trim(label.get<std::string>()).empty()) {
                        n.audience.push_back(trim(label.get<std::string>()));
                    }
                }
            } else if (a->is_string() && !trim(a->get<std::string>()).empty()) {
                n.audience.push_back(trim(a->get<std::string>()));
            }
        }
        // upsert unions audience labels by normalized form
        ProductNode bare = n;
        bare.audience.clear();
        g.upsert_product(bare);
        g.upsert_product(n);
    }

    if (!seed_id.empty()) {
        ProductNode seed_node;
        seed_node.node_id = seed_id;
        seed_node.title = trim(seed.title);
        seed_node.is_seed = true;
        g.upsert_product(seed_node);
    }

    if (auto edges_it = doc.find("edges"); edges_it != doc.end() && edges_it->is_array()) {
        for (const auto& item : *edges_it) {
            if (!item.is_object()) {
                ++dropped;
                continue;
            }
            const auto subject = string_field(item, {"subject"});
            const auto predicate = string_field(item, {"predicate"});
            const auto object = string_field(item, {"object"});
            const auto s_id = ensure_product(subject);
            const auto o_id = ensure_product(object);
            if (predicate.empty() || s_id.empty() || o_id.empty() || s_id == o_id) {
                ++dropped;
                continue;
            }
            g.add_edge(make_edge(s_id, predicate, o_id));
        }
    }

    for (const auto& [id, node] : g.products()) {
        for (const auto& label : node.audience) {
            const auto gid = normalize_label(label);
            if (gid.empty()) continue;
            g.add_group({gid, label});
            g.add_audience_edge(gid, id);
        }
    }
    return g;
}

}  // namespace

ParseOutcome parse_generation_response(std::string_view raw, const SeedProduct& seed) {
    ParseOutcome out;
    auto attempt = [&](std::string_view text, ParseStage stage) -> bool {
        json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
        if (doc.is_discarded()) {
            out.error = "not valid JSON";
            return false;
        }
        try {
            std::size_t dropped = 0;
            out.subgraph = build_subgraph(doc, seed, dropped);
            out.dropped_edges = dropped;
            out.stage = stage;
            out.error.clear();
            return true;
        } catch (const std::exception& e) {
            out.error = e.what();
            return false;
        }
    };

    if (attempt(raw, ParseStage::Strict)) return out;
    if (auto span = extract_json_object(raw); span && span->size() != trim(raw).size()) {
        if (attempt(*span, ParseStage::Extracted)) return out;
    }
    out.stage = ParseStage::Failed;
    out.subgraph.reset();
    if (out.error.empty()) out.error = "no JSON object found";
    return out;
}

}  // namespace pkgforge
