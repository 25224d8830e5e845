#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pkgforge/embedding.h"
#include "pkgforge/graph.h"
#include "pkgforge/knn_index.h"

namespace pkgforge {

class MappingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultMappingThreshold = 0.75;
inline constexpr std::size_t kDefaultMaxMatches = 3;

struct MappingResult {
    std::string node_id;
    /// match_order; when unmapped, holds the single best candidate for audit.
    std::vector<KnnMatch> matches;
    bool mapped = false;

    bool operator==(const MappingResult&) const = default;
};

/// One result per product node, in node_id order, queried by the node title.
std::vector<MappingResult> map_nodes(const KnowledgeGraph& graph, const KnnIndex& index,
                                     const EmbeddingProvider& provider, double threshold = kDefaultMappingThreshold,
                                     std::size_t max_matches = kDefaultMaxMatches);

/// Replaces every mapped node by its catalog items and expands each edge over
/// the cartesian product of its endpoint items. Unmapped nodes and their
/// edges are dropped. Throws MappingError when a product node has no result
/// or a matched item is missing from the catalog.
KnowledgeGraph fuse_graph(const KnowledgeGraph& graph, const std::vector<MappingResult>& mappings,
                          const std::vector<CatalogItem>& catalog);

/// JSON lines for the unmapped results: node_id, title, best candidate.
std::string unmapped_audit_jsonl(const KnowledgeGraph& graph, const std::vector<MappingResult>& mappings);

}  // namespace pkgforge
