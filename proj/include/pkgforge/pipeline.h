#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pkgforge/embedding.h"
#include "pkgforge/gateway.h"
#include "pkgforge/graph.h"
#include "pkgforge/knn_index.h"
#include "pkgforge/prompt.h"
#include "pkgforge/serving.h"
#include "pkgforge/validator.h"

namespace pkgforge {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GenerationConfig {
    int k = 5;
    double temperature = 0.2;
    int max_output_tokens = 1024;
};

struct ValidationConfig {
    int prune_threshold = kDefaultPruneThreshold;
    int max_iterations = 3;
    RefineTargets targets;
    double temperature = 0.0;
    int max_output_tokens = 512;
};

struct MappingConfig {
    double threshold = 0.75;
    std::size_t max_matches = 3;
    /// "hashing" or "remote".
    std::string embedder = "hashing";
    std::size_t dimension = HashingEmbedder::kDefaultDimension;
    std::string endpoint_url;
    std::string auth_token_env_var;
    IndexMode index_mode = IndexMode::Exact;
};

struct ServingConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t default_k = 6;
    std::size_t worker_threads = 32;
    std::filesystem::path cache_path;
};

/// Relative paths are resolved against the directory of the config file.
struct PipelineConfig {
    std::filesystem::path template_path;
    std::filesystem::path seeds_path;
    std::filesystem::path catalog_path;
    std::filesystem::path output_dir = "out";
    BackendConfig gateway;
    GenerationConfig generation;
    ValidationConfig validation;
    MappingConfig mapping;
    ServingConfig serving;
};

PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// Default artifact names inside the output directory.
namespace artifacts {
inline constexpr std::string_view kInitialGraph = "graph.initial.jsonl";
inline constexpr std::string_view kGenerateReport = "generate_failures.jsonl";
inline constexpr std::string_view kValidatedGraph = "graph.validated.jsonl";
inline constexpr std::string_view kValidationReports = "validation_reports.jsonl";
inline constexpr std::string_view kFusedGraph = "graph.fused.jsonl";
inline constexpr std::string_view kUnmapped = "unmapped.jsonl";
inline constexpr std::string_view kCache = "cache.bin";
inline constexpr std::string_view kCacheDebug = "cache.debug.jsonl";
}  // namespace artifacts

struct CommandArgs {
    std::optional<std::filesystem::path> in;
    std::optional<std::filesystem::path> out;
    std::optional<std::string> format;
};

enum ExitCode : int { kExitOk = 0, kExitFatal = 1, kExitPartial = 2 };

struct CommandResult {
    int exit_code = kExitOk;
    /// One line, `key=value` pairs after the command name.
    std::string summary;
};

std::vector<SeedProduct> load_seeds(const std::filesystem::path& path);
std::unique_ptr<EmbeddingProvider> make_embedder(const MappingConfig& config);

CommandResult cmd_generate(const PipelineConfig& config, const CommandArgs& args = {});
CommandResult cmd_validate(const PipelineConfig& config, const CommandArgs& args = {});
CommandResult cmd_map(const PipelineConfig& config, const CommandArgs& args = {});
CommandResult cmd_compile(const PipelineConfig& config, const CommandArgs& args = {});
/// Blocks until SIGINT/SIGTERM; SIGHUP reloads the cache file.
CommandResult cmd_serve(const PipelineConfig& config, const CommandArgs& args = {});
CommandResult cmd_stats(const PipelineConfig& config, const CommandArgs& args = {});
CommandResult cmd_export(const PipelineConfig& config, const CommandArgs& args = {});

inline constexpr std::array<std::string_view, 6> kStatsColumns = {
    "nodes", "edges", "avg_edge_score_before_pruning", "relation_imprecise_rate_before_pruning",
    "enterprise_nodes", "enterprise_edges"};

/// Initial-graph and enterprise-graph figures side by side; absent values
/// print as n/a.
struct PipelineStats {
    std::optional<std::size_t> nodes;
    std::optional<std::size_t> edges;
    std::optional<double> avg_edge_score_before_pruning;
    std::optional<double> relation_imprecise_rate_before_pruning;
    std::optional<std::size_t> enterprise_nodes;
    std::optional<std::size_t> enterprise_edges;
};

PipelineStats collect_stats(const std::optional<KnowledgeGraph>& initial,
                            const std::optional<ValidationReport>& first_report,
                            const std::optional<KnowledgeGraph>& fused);
/// Header row of kStatsColumns, then the value row, tab separated.
std::string format_stats_table(const PipelineStats& stats);

}  // namespace pkgforge
