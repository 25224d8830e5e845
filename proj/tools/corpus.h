#pragma once

#include <cstdint>
#include <filesystem>

namespace pkgforge::corpus {

struct CorpusOptions {
    std::size_t seed_count = 50;
    int k = 5;
    std::uint64_t rng_seed = 20240917;
};

struct CorpusSummary {
    std::size_t seeds = 0;
    std::size_t catalog_items = 0;
    std::size_t fixtures = 0;
};

/// Writes a synthetic sneaker corpus into `dir`: seeds.jsonl, catalog.jsonl,
/// config.json and a fixtures/ directory holding scripted replay responses
/// for every generation and judge request the pipeline will issue. A few
/// generation responses are wrapped in prose and one needs a re-ask, so the
/// repair ladder is exercised.
CorpusSummary write_sneaker_corpus(const std::filesystem::path& dir, const CorpusOptions& options = {});

}  // namespace pkgforge::corpus
