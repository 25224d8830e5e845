#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pkgforge/gateway.h"
#include "pkgforge/graph.h"

namespace pkgforge {

struct EdgeJudgment {
    EdgeKey edge_key;
    int acceptability_score = 0;
    bool rationale_accurate = true;
    /// Present iff rationale_accurate is false.
    std::optional<std::string> alternative_rationale;

    bool operator==(const EdgeJudgment&) const = default;
};

/// Verdict fields read from one judge response, before they are tied to an edge.
struct ParsedVerdict {
    int score = 0;
    bool accurate = true;
    std::optional<std::string> alternative;
};

/// Accepts the edge-evaluation JSON shape, including Python-style
/// True/False/None literals and surrounding prose. nullopt when the response
/// carries no usable verdict.
std::optional<ParsedVerdict> parse_judgment_response(std::string_view raw);

struct JudgeOptions {
    double temperature = 0.0;
    int max_output_tokens = 512;
    /// 0 means one worker per gateway in-flight slot.
    int workers = 0;
};

struct JudgeBatch {
    /// Ordered by edge key.
    std::vector<EdgeJudgment> judgments;
    /// Unparseable after one retry, or the gateway failed for the edge.
    std::vector<EdgeKey> missing;
    std::vector<std::pair<EdgeKey, std::string>> errors;
};

/// Judges every generated edge; loop and audience edges carry no rationale
/// and are skipped.
JudgeBatch judge_edges(const KnowledgeGraph& graph, LlmGateway& gateway, const JudgeOptions& options = {});

struct ValidationReport {
    /// Absent when nothing was judged.
    std::optional<double> average_edge_score;
    /// Inaccurate judgments over judged edges.
    double relation_imprecise_rate = 0.0;
    std::size_t judged_edge_count = 0;
    std::size_t missing_judgment_count = 0;
    std::size_t rewritten_edge_count = 0;
    std::size_t pruned_edge_count = 0;
    std::size_t pruned_node_count = 0;
    std::size_t iteration_index = 0;

    bool operator==(const ValidationReport&) const = default;
};

ValidationReport compute_report(const std::vector<EdgeJudgment>& judgments);

struct PruneSummary {
    std::size_t edges_removed = 0;
    std::size_t nodes_removed = 0;
    /// Generated edges without a judgment in this batch; they survive.
    std::size_t unjudged_edges = 0;
};

inline constexpr int kDefaultPruneThreshold = 6;

/// Attaches scores to judged edges, removes generated edges scoring below
/// `threshold`, then drops non-seed products left without any generated or
/// loop edge (and their audience edges).
PruneSummary apply_pruning(KnowledgeGraph& graph, const std::vector<EdgeJudgment>& judgments,
                           int threshold = kDefaultPruneThreshold);

struct FixSummary {
    std::size_t rewritten = 0;
    /// Rewrites that landed on an existing triple and merged into it.
    std::size_t collapsed = 0;
    /// Old key -> key the edge lives under after the rewrite.
    std::map<EdgeKey, EdgeKey> moved;
};

/// Replaces the predicate of every inaccurately-judged edge with the judge's
/// alternative. The rewritten edge is marked accurate.
FixSummary apply_rationale_fixes(KnowledgeGraph& graph, const std::vector<EdgeJudgment>& judgments);

struct RefineTargets {
    double min_avg_score = 8.0;
    double max_imprecise_rate = 0.10;
};

struct RefineOptions {
    int threshold = kDefaultPruneThreshold;
    int max_iterations = 3;
    RefineTargets targets;
    JudgeOptions judge;
};

struct RefineResult {
    KnowledgeGraph graph;
    /// One per iteration; metrics are measured before that iteration's pruning.
    std::vector<ValidationReport> reports;
};

/// judge -> report -> fix -> prune, repeated until the report meets both
/// targets or max_iterations is reached. Throws GatewayError when a whole
/// batch fails at the gateway.
RefineResult refine_loop(KnowledgeGraph graph, LlmGateway& gateway, const RefineOptions& options = {});

std::string report_to_json_line(const ValidationReport& report);
ValidationReport report_from_json_line(std::string_view line);

}  // namespace pkgforge
