#include "pkgforge/mapper.h"

#include <map>
#include <unordered_map>

#include <json.hpp>

namespace pkgforge {

std::vector<MappingResult> map_nodes(const KnowledgeGraph& graph, const KnnIndex& index,
                                     const EmbeddingProvider& provider, double threshold, std::size_t max_matches) {
    if (!(threshold >= 0.0)) throw MappingError("mapping threshold must be >= 0");
    if (max_matches == 0) throw MappingError("max_matches must be >= 1");
    if (index.size() == 0) throw MappingError("cannot map against an empty index");

    std::vector<MappingResult> results;
    results.reserve(graph.product_count());
    for (const auto& [id, node] : graph.products()) {
        MappingResult r;
        r.node_id = id;
        std::vector<KnnMatch> found;
        try {
            const auto q = provider.embed(node.title.empty() ? id : node.title);
            found = index.query(q, max_matches);
        } catch (const std::exception& e) {
            throw MappingError("mapping node '" + id + "': " + e.what());
        }
        for (const auto& m : found) {
            if (m.similarity >= threshold) r.matches.push_back(m);
        }
        r.mapped = !r.matches.empty();
        if (!r.mapped && !found.empty()) r.matches.push_back(found.front());
        results.push_back(std::move(r));
    }
    return results;
}

KnowledgeGraph fuse_graph(const KnowledgeGraph& graph, const std::vector<MappingResult>& mappings,
                          const std::vector<CatalogItem>& catalog) {
    std::unordered_map<std::string, const CatalogItem*> items;
    for (const auto& item : catalog) items.emplace(item.item_id, &item);

    std::map<std::string, std::vector<std::string>, std::less<>> targets;
    for (const auto& m : mappings) {
        if (!graph.find_product(m.node_id)) continue;
        auto& t = targets[m.node_id];
        if (!m.mapped) continue;
        for (const auto& match : m.matches) {
            if (!items.contains(match.item_id)) {
                throw MappingError("node '" + m.node_id + "' maps to '" + match.item_id + "', which is not in the catalog");
            }
            t.push_back(match.item_id);
        }
    }
    for (const auto& [id, node] : graph.products()) {
        if (!targets.contains(id)) throw MappingError("product node '" + id + "' has no mapping result");
    }

    KnowledgeGraph fused;
    for (const auto& [id, node] : graph.products()) {
        for (const auto& item_id : targets[id]) {
            const auto& item = *items.at(item_id);
            ProductNode n;
            n.node_id = item.item_id;
            n.title = item.title;
            n.brand = item.brand;
            n.product_type = item.category;
            n.audience = node.audience;
            n.is_seed = node.is_seed;
            fused.upsert_product(n);
        }
    }
    for (const auto& a : graph.audience_edges()) {
        if (targets[a.product_id].empty()) continue;
        if (const auto* group = graph.find_group(a.group_id)) fused.add_group(*group);
    }
    for (const auto& a : graph.audience_edges()) {
        for (const auto& item_id : targets[a.product_id]) fused.add_audience_edge(a.group_id, item_id);
    }

    for (const auto& [key, edge] : graph.edges()) {
        const auto& subjects = targets[edge.subject_id];
        const auto& objects = targets[edge.object_id];
        for (const auto& s : subjects) {
            for (const auto& o : objects) {
                Edge e = edge;
                e.subject_id = s;
                e.object_id = o;
                // two recommended products resolving to one item say nothing useful
                if (s == o && edge.source != EdgeSource::SelfLoop) continue;
                if (Edge* existing = fused.find_edge(e.key())) {
                    if (e.score && (!existing->score || *e.score > *existing->score)) {
                        existing->score = e.score;
                        existing->rationale_accurate = e.rationale_accurate;
                    }
                    continue;
                }
                fused.add_edge(e);
            }
        }
    }
    return fused;
}

std::string unmapped_audit_jsonl(const KnowledgeGraph& graph, const std::vector<MappingResult>& mappings) {
    std::string out;
    for (const auto& m : mappings) {
        if (m.mapped) continue;
        nlohmann::ordered_json line;
        line["node_id"] = m.node_id;
        const auto* node = graph.find_product(m.node_id);
        line["title"] = node ? node->title : "";
        if (!m.matches.empty()) {
            line["best_item_id"] = m.matches.front().item_id;
            line["best_similarity"] = m.matches.front().similarity;
        } else {
            line["best_item_id"] = nullptr;
            line["best_similarity"] = nullptr;
        }
        out += line.dump();
        out += '\n';
    }
    return out;
}

}  // namespace pkgforge
