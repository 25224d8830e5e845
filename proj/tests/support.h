#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pkgforge/graph.h"

namespace testsupport {

std::filesystem::path data_path(const std::string& name);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "pkgforge");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

struct RandomGraphOptions {
    std::size_t nodes = 500;
    std::size_t edges = 2000;
    std::size_t groups = 20;
    double seed_fraction = 0.05;
    double scored_fraction = 0.0;
    double loop_fraction = 0.0;
    bool awkward_text = false;
};

/// Random graph with unique edge keys. `awkward_text` sprinkles quotes,
/// backslashes, commas, tabs and non-ASCII text into titles and predicates.
pkgforge::KnowledgeGraph random_graph(std::mt19937_64& rng, const RandomGraphOptions& options);

struct PipelineRun {
    std::vector<int> exit_codes;  // generate, validate, map, compile
    std::vector<std::string> summaries;
    std::string cache_bytes;
    std::filesystem::path out_dir;
};

/// Writes the sneaker corpus into `dir` and runs every offline stage over it
/// in replay mode.
PipelineRun run_corpus_pipeline(const std::filesystem::path& dir, std::size_t seeds);

}  // namespace testsupport
