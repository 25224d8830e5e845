#include "pkgforge/graph.h"

#include <algorithm>
#include <unordered_set>

#include "pkgforge/util.h"

namespace pkgforge {

std::string_view to_string(EdgeSource s) {
    switch (s) {
        case EdgeSource::Generated: return "generated";
        case EdgeSource::SelfLoop: return "self_loop";
        case EdgeSource::Audience: return "audience";
    }
    return "generated";
}

EdgeSource edge_source_from_string(std::string_view s) {
    if (s == "generated") return EdgeSource::Generated;
    if (s == "self_loop") return EdgeSource::SelfLoop;
    if (s == "audience") return EdgeSource::Audience;
    throw GraphError("unknown edge source '" + std::string(s) + "'");
}

EdgeKey::EdgeKey(std::string subject, std::string_view predicate_text, std::string object)
    : subject_id(std::move(subject)), predicate(to_lower_ascii(predicate_text)), object_id(std::move(object)) {}

Edge make_edge(std::string subject_id, std::string predicate, std::string object_id, EdgeSource source) {
    Edge e;
    e.subject_id = std::move(subject_id);
    e.word_count = word_count(predicate);
    e.predicate = std::move(predicate);
    e.object_id = std::move(object_id);
    e.source = source;
    return e;
}

namespace {

void union_audience(std::vector<std::string>& into, const std::vector<std::string>& from) {
    for (const auto& label : from) {
        const auto id = normalize_label(label);
        const bool present = std::any_of(into.begin(), into.end(),
                                         [&](const std::string& existing) { return normalize_label(existing) == id; });
        if (!present) into.push_back(label);
    }
}

}  // namespace

ProductNode& KnowledgeGraph::upsert_product(const ProductNode& node) {
    if (node.node_id.empty()) throw GraphError("product node with empty id");
    auto [it, inserted] = products_.try_emplace(node.node_id, node);
    if (inserted) return it->second;
    auto& existing = it->second;
    if (existing.title.empty()) existing.title = node.title;
    if (existing.brand.empty()) existing.brand = node.brand;
    if (existing.product_type.empty()) existing.product_type = node.product_type;
    union_audience(existing.audience, node.audience);
    existing.is_seed = existing.is_seed || node.is_seed;
    return existing;
}

const UserGroupNode& KnowledgeGraph::add_group(const UserGroupNode& group) {
    if (group.group_id.empty()) throw GraphError("user group with empty id");
    return groups_.try_emplace(group.group_id, group).first->second;
}

bool KnowledgeGraph::add_edge(const Edge& edge) {
    if (trim(edge.predicate).empty()) throw GraphError("edge with empty predicate");
    if (!products_.contains(edge.subject_id)) throw GraphError("edge subject '" + edge.subject_id + "' is not a node");
    if (!products_.contains(edge.object_id)) throw GraphError("edge object '" + edge.object_id + "' is not a node");
    if (edge.subject_id == edge.object_id && edge.source != EdgeSource::SelfLoop) {
        throw GraphError("non-loop edge from '" + edge.subject_id + "' to itself");
    }
    if (edge.score && (*edge.score < 1 || *edge.score > 10)) throw GraphError("edge score outside [1,10]");
    return edges_.try_emplace(edge.key(), edge).second;
}

bool KnowledgeGraph::add_audience_edge(const std::string& group_id, const std::string& product_id) {
    if (!groups_.contains(group_id)) throw GraphError("audience edge group '" + group_id + "' is not a node");
    if (!products_.contains(product_id)) throw GraphError("audience edge product '" + product_id + "' is not a node");
    return audience_edges_.insert({group_id, product_id}).second;
}

const ProductNode* KnowledgeGraph::find_product(std::string_view id) const {
    auto it = products_.find(id);
    return it == products_.end() ? nullptr : &it->second;
}

const UserGroupNode* KnowledgeGraph::find_group(std::string_view id) const {
    auto it = groups_.find(id);
    return it == groups_.end() ? nullptr : &it->second;
}

const Edge* KnowledgeGraph::find_edge(const EdgeKey& key) const {
    auto it = edges_.find(key);
    return it == edges_.end() ? nullptr : &it->second;
}

Edge* KnowledgeGraph::find_edge(const EdgeKey& key) {
    auto it = edges_.find(key);
    return it == edges_.end() ? nullptr : &it->second;
}

bool KnowledgeGraph::remove_edge(const EdgeKey& key) { return edges_.erase(key) > 0; }

std::size_t KnowledgeGraph::remove_products(const std::set<std::string, std::less<>>& ids) {
    std::size_t removed = 0;
    for (const auto& id : ids) removed += products_.erase(id);
    if (removed == 0) return 0;

    std::erase_if(edges_, [&](const auto& kv) {
        return ids.contains(kv.second.subject_id) || ids.contains(kv.second.object_id);
    });
    std::set<std::string, std::less<>> touched_groups;
    std::erase_if(audience_edges_, [&](const AudienceEdge& a) {
        if (!ids.contains(a.product_id)) return false;
        touched_groups.insert(a.group_id);
        return true;
    });
    for (const auto& a : audience_edges_) touched_groups.erase(a.group_id);
    for (const auto& g : touched_groups) groups_.erase(g);
    return removed;
}

std::optional<EdgeKey> KnowledgeGraph::rewrite_predicate(const EdgeKey& key, const std::string& new_predicate) {
    if (trim(new_predicate).empty()) throw GraphError("rewrite to an empty predicate");
    auto it = edges_.find(key);
    if (it == edges_.end()) return std::nullopt;
    Edge edge = std::move(it->second);
    edges_.erase(it);
    edge.predicate = new_predicate;
    edge.word_count = word_count(new_predicate);
    const auto new_key = edge.key();
    auto [slot, inserted] = edges_.try_emplace(new_key, edge);
    if (!inserted) {
        auto& kept = slot->second;
        if (edge.score && (!kept.score || *edge.score > *kept.score)) {
            kept.score = edge.score;
            kept.rationale_accurate = edge.rationale_accurate;
        }
    }
    return new_key;
}

std::vector<std::string> KnowledgeGraph::integrity_problems() const {
    std::vector<std::string> problems;
    for (const auto& [id, node] : products_) {
        if (id != node.node_id) problems.push_back("product key '" + id + "' differs from node_id");
        for (const auto& label : node.audience) {
            if (trim(label).empty()) problems.push_back("product '" + id + "' has an empty audience label");
        }
    }
    for (const auto& [id, group] : groups_) {
        if (id != group.group_id) problems.push_back("group key '" + id + "' differs from group_id");
    }
    for (const auto& [key, edge] : edges_) {
        if (!(key == edge.key())) problems.push_back("edge key out of sync for " + edge.subject_id);
        if (!products_.contains(edge.subject_id)) problems.push_back("dangling subject " + edge.subject_id);
        if (!products_.contains(edge.object_id)) problems.push_back("dangling object " + edge.object_id);
        if (trim(edge.predicate).empty()) problems.push_back("empty predicate on " + edge.subject_id);
        if (edge.subject_id == edge.object_id && edge.source != EdgeSource::SelfLoop) {
            problems.push_back("non-loop self edge on " + edge.subject_id);
        }
        if (edge.score && (*edge.score < 1 || *edge.score > 10)) {
            problems.push_back("score out of range on " + edge.subject_id);
        }
        if (edge.word_count != word_count(edge.predicate)) {
            problems.push_back("stale word_count on " + edge.subject_id);
        }
    }
    for (const auto& a : audience_edges_) {
        if (!groups_.contains(a.group_id)) problems.push_back("dangling audience group " + a.group_id);
        if (!products_.contains(a.product_id)) problems.push_back("dangling audience product " + a.product_id);
    }
    return problems;
}

void merge_subgraph(KnowledgeGraph& graph, const KnowledgeGraph& subgraph) {
    for (const auto& [id, node] : subgraph.products()) graph.upsert_product(node);
    for (const auto& [id, group] : subgraph.groups()) graph.add_group(group);
    for (const auto& [key, edge] : subgraph.edges()) graph.add_edge(edge);
    for (const auto& a : subgraph.audience_edges()) graph.add_audience_edge(a.group_id, a.product_id);
}

std::size_t add_self_loops(KnowledgeGraph& graph, std::string_view predicate) {
    if (trim(predicate).empty()) throw GraphError("self-loop predicate must be non-empty");
    std::vector<std::string> ids;
    ids.reserve(graph.product_count());
    for (const auto& [id, node] : graph.products()) ids.push_back(id);
    std::size_t added = 0;
    for (const auto& id : ids) {
        if (graph.add_edge(make_edge(id, std::string(predicate), id, EdgeSource::SelfLoop))) ++added;
    }
    return added;
}

namespace {

std::vector<std::pair<std::string, std::size_t>> sorted_distribution(const std::map<std::string, std::size_t>& counts) {
    std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

}  // namespace

GraphStats compute_stats(const KnowledgeGraph& graph) {
    GraphStats s;
    s.node_count = graph.product_count();
    s.group_count = graph.groups().size();
    s.edge_count = graph.edge_count();
    s.audience_edge_count = graph.audience_edges().size();

    std::map<std::string, std::size_t> predicates;
    for (const auto& [key, edge] : graph.edges()) {
        ++predicates[edge.predicate];
        if (edge.overlong()) ++s.overlong_edge_count;
    }
    std::map<std::string, std::size_t> audiences;
    for (const auto& a : graph.audience_edges()) {
        const auto* g = graph.find_group(a.group_id);
        ++audiences[g != nullptr ? g->label : a.group_id];
    }
    s.edge_predicate_distribution = sorted_distribution(predicates);
    s.audience_distribution = sorted_distribution(audiences);
    return s;
}

}  // namespace pkgforge
