#pragma once

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pkgforge {

class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class EdgeSource { Generated, SelfLoop, Audience };

std::string_view to_string(EdgeSource s);
EdgeSource edge_source_from_string(std::string_view s);

inline constexpr std::size_t kMaxRationaleWords = 5;
inline constexpr std::string_view kSelfLoopPredicate = "Same Product";

struct ProductNode {
    std::string node_id;
    std::string title;
    std::string brand;
    std::string product_type;
    std::vector<std::string> audience;
    bool is_seed = false;

    bool operator==(const ProductNode&) const = default;
};

struct UserGroupNode {
    std::string group_id;
    std::string label;

    bool operator==(const UserGroupNode&) const = default;
};

/// Triple identity. Predicates compare case-insensitively, so the key holds
/// the lowercased form.
struct EdgeKey {
    std::string subject_id;
    std::string predicate;
    std::string object_id;

    EdgeKey() = default;
    EdgeKey(std::string subject, std::string_view predicate_text, std::string object);

    auto operator<=>(const EdgeKey&) const = default;
};

struct Edge {
    std::string subject_id;
    std::string predicate;
    std::string object_id;
    std::size_t word_count = 0;
    std::optional<int> score;
    std::optional<bool> rationale_accurate;
    EdgeSource source = EdgeSource::Generated;

    EdgeKey key() const { return EdgeKey(subject_id, predicate, object_id); }
    /// Rationales longer than the display bound are kept but flagged.
    bool overlong() const { return word_count > kMaxRationaleWords; }

    bool operator==(const Edge&) const = default;
};

Edge make_edge(std::string subject_id, std::string predicate, std::string object_id,
               EdgeSource source = EdgeSource::Generated);

struct AudienceEdge {
    std::string group_id;
    std::string product_id;

    auto operator<=>(const AudienceEdge&) const = default;
};

/// Typed triple store. Node and edge collections are ordered so iteration,
/// export and hashing are deterministic.
class KnowledgeGraph {
public:
    using ProductMap = std::map<std::string, ProductNode, std::less<>>;
    using GroupMap = std::map<std::string, UserGroupNode, std::less<>>;
    using EdgeMap = std::map<EdgeKey, Edge>;

    /// Inserts or merges: empty brand/type are filled, audience labels are
    /// unioned by normalized label, is_seed is or-ed.
    ProductNode& upsert_product(const ProductNode& node);
    /// Inserts if absent; returns the stored node.
    const UserGroupNode& add_group(const UserGroupNode& group);

    /// False when the triple already exists. Throws GraphError on a dangling
    /// endpoint, empty predicate, score outside [1,10] or a non-loop edge
    /// whose endpoints coincide.
    bool add_edge(const Edge& edge);
    bool add_audience_edge(const std::string& group_id, const std::string& product_id);

    const ProductNode* find_product(std::string_view id) const;
    const UserGroupNode* find_group(std::string_view id) const;
    const Edge* find_edge(const EdgeKey& key) const;
    Edge* find_edge(const EdgeKey& key);

    bool remove_edge(const EdgeKey& key);
    /// Drops the products together with every incident edge and audience
    /// edge. Groups left without members are dropped too.
    std::size_t remove_products(const std::set<std::string, std::less<>>& ids);

    /// Replaces an edge's predicate. If the rewritten triple already exists the
    /// two collapse into one carrying the higher score. Returns the key now
    /// holding the edge, or nullopt when `key` is absent.
    std::optional<EdgeKey> rewrite_predicate(const EdgeKey& key, const std::string& new_predicate);

    const ProductMap& products() const noexcept { return products_; }
    const GroupMap& groups() const noexcept { return groups_; }
    const EdgeMap& edges() const noexcept { return edges_; }
    const std::set<AudienceEdge>& audience_edges() const noexcept { return audience_edges_; }

    std::size_t product_count() const noexcept { return products_.size(); }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    bool empty() const noexcept { return products_.empty() && groups_.empty(); }

    /// Full scan; empty when every edge endpoint resolves and every stored
    /// field satisfies its invariant.
    std::vector<std::string> integrity_problems() const;

    bool operator==(const KnowledgeGraph&) const = default;

private:
    ProductMap products_;
    GroupMap groups_;
    EdgeMap edges_;
    std::set<AudienceEdge> audience_edges_;
};

/// Adds the subgraph's nodes, groups, triples and audience edges. Idempotent.
void merge_subgraph(KnowledgeGraph& graph, const KnowledgeGraph& subgraph);

/// Adds (n, predicate, n) for every product node lacking it. Returns the
/// number of loops added.
std::size_t add_self_loops(KnowledgeGraph& graph, std::string_view predicate = kSelfLoopPredicate);

struct GraphStats {
    std::size_t node_count = 0;
    std::size_t group_count = 0;
    std::size_t edge_count = 0;
    std::size_t audience_edge_count = 0;
    std::size_t overlong_edge_count = 0;
    /// Descending count, then lexicographic.
    std::vector<std::pair<std::string, std::size_t>> edge_predicate_distribution;
    std::vector<std::pair<std::string, std::size_t>> audience_distribution;

    bool operator==(const GraphStats&) const = default;
};

GraphStats compute_stats(const KnowledgeGraph& graph);

}  // namespace pkgforge
