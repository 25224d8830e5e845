#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "pkgforge/graph.h"
#include "pkgforge/prompt.h"

namespace pkgforge {

/// Repair-ladder stage a seed reached. The first two are handled here; the
/// re-ask and the final failure are recorded by the pipeline.
enum class ParseStage { Strict, Extracted, Reasked, Failed };

std::string_view to_string(ParseStage s);

struct ParseOutcome {
    /// Present on success.
    std::optional<KnowledgeGraph> subgraph;
    ParseStage stage = ParseStage::Failed;
    std::string error;
    /// Edges skipped for an empty predicate, an unnamed endpoint or a
    /// subject equal to its object.
    std::size_t dropped_edges = 0;

    bool ok() const noexcept { return subgraph.has_value(); }
};

/// Product ids are normalized titles.
std::string product_id_for_title(std::string_view title);

/// Parses a generation response into a per-seed subgraph. Never throws:
/// malformed input comes back as a failed outcome.
ParseOutcome parse_generation_response(std::string_view raw, const SeedProduct& seed);

}  // namespace pkgforge
