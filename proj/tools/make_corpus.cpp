// Writes the synthetic sneaker corpus used by the replay pipeline demo.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "corpus.h"

int main(int argc, char** argv) {
    CLI::App app{"Generate a synthetic sneaker corpus with scripted replay fixtures"};
    std::string dir = "corpus";
    pkgforge::corpus::CorpusOptions options;
    app.add_option("dir", dir, "output directory");
    app.add_option("--seeds", options.seed_count, "number of seed products");
    app.add_option("--k", options.k, "recommendations per seed");
    app.add_option("--rng-seed", options.rng_seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

    try {
        const auto s = pkgforge::corpus::write_sneaker_corpus(dir, options);
        std::printf("corpus seeds=%zu catalog_items=%zu fixtures=%zu out=%s\n", s.seeds, s.catalog_items, s.fixtures,
                    dir.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "make_corpus: %s\n", e.what());
        return 1;
    }
}
