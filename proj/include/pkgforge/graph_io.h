#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pkgforge/graph.h"

namespace pkgforge {

enum class GraphFormat { JsonLines, NTriples, VizCsv };

GraphFormat graph_format_from_string(std::string_view s);
std::string_view to_string(GraphFormat f);

/// Malformed import input; carries the 1-based line number.
class GraphFormatError : public std::runtime_error {
public:
    GraphFormatError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

inline constexpr int kGraphFormatVersion = 1;

std::string to_jsonlines(const KnowledgeGraph& graph);
KnowledgeGraph from_jsonlines(std::string_view text);

std::string to_ntriples(const KnowledgeGraph& graph);
KnowledgeGraph from_ntriples(std::string_view text);

struct VizCsv {
    std::string nodes;  // id,title,brand,type,is_seed
    std::string edges;  // subject,predicate,object,score,source
};
VizCsv to_viz_csv(const KnowledgeGraph& graph);
/// Lossy: audience labels, user groups and accuracy flags are not carried.
KnowledgeGraph from_viz_csv(std::string_view nodes_csv, std::string_view edges_csv);

/// jsonlines and ntriples write a single file; viz_csv treats `path` as a
/// directory and writes nodes.csv and edges.csv into it. Writes are atomic.
void export_graph(const KnowledgeGraph& graph, GraphFormat format, const std::filesystem::path& path);
KnowledgeGraph import_graph(const std::filesystem::path& path, GraphFormat format);

/// Percent-encodes everything outside RFC 3986 unreserved characters.
std::string percent_encode(std::string_view s);
std::string percent_decode(std::string_view s);

/// FNV-1a-64 of the jsonlines serialization.
std::uint64_t graph_hash(const KnowledgeGraph& graph);

}  // namespace pkgforge
