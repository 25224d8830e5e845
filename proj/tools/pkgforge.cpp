// pkgforge: offline graph pipeline and recommendation service.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "pkgforge/pipeline.h"

using namespace pkgforge;

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("pkgforge"));

    CLI::App app{"Build, validate, map and serve an LLM-generated product knowledge graph"};
    app.require_subcommand(1);

    std::string config_path;
    std::string in;
    std::string out;
    std::string format;
    std::string output_dir;
    std::string backend;
    std::string fixtures_dir;
    std::optional<int> port;
    std::optional<int> k;
    std::optional<double> threshold;
    std::string log_level = "info";

    const char* names[] = {"generate", "validate", "map", "compile", "serve", "stats", "export"};
    for (const char* name : names) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "pipeline config (JSON)");
        sub->add_option("--in", in, "input artifact");
        sub->add_option("--out", out, "output artifact");
        sub->add_option("--format", format, "jsonlines | ntriples | viz_csv");
        sub->add_option("--output-dir", output_dir, "overrides output_dir");
        sub->add_option("--backend", backend, "live | replay")->check(CLI::IsMember({"live", "replay"}));
        sub->add_option("--fixtures-dir", fixtures_dir, "overrides gateway.fixtures_dir");
        sub->add_option("--port", port, "overrides serving.port");
        sub->add_option("--k", k, "overrides generation k");
        sub->add_option("--threshold", threshold, "overrides mapping.threshold");
        sub->add_option("--log-level", log_level, "trace | debug | info | warn | error");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitFatal;
    }
    spdlog::set_level(spdlog::level::from_str(log_level));

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        PipelineConfig config = config_path.empty() ? parse_config("{}") : load_config(config_path);
        if (!output_dir.empty()) config.output_dir = output_dir;
        if (backend == "live") config.gateway.mode = BackendMode::Live;
        if (backend == "replay") config.gateway.mode = BackendMode::Replay;
        if (!fixtures_dir.empty()) config.gateway.fixtures_dir = fixtures_dir;
        if (port) config.serving.port = *port;
        if (k) config.generation.k = *k;
        if (threshold) config.mapping.threshold = *threshold;

        CommandArgs args;
        if (!in.empty()) args.in = in;
        if (!out.empty()) args.out = out;
        if (!format.empty()) args.format = format;

        CommandResult result;
        if (cmd == "generate") result = cmd_generate(config, args);
        else if (cmd == "validate") result = cmd_validate(config, args);
        else if (cmd == "map") result = cmd_map(config, args);
        else if (cmd == "compile") result = cmd_compile(config, args);
        else if (cmd == "serve") result = cmd_serve(config, args);
        else if (cmd == "stats") result = cmd_stats(config, args);
        else result = cmd_export(config, args);

        std::printf("%s\n", result.summary.c_str());
        return result.exit_code;
    } catch (const std::exception& e) {
        spdlog::error("{}: {}", cmd, e.what());
        std::printf("%s error=%s\n", cmd.c_str(), "fatal");
        return kExitFatal;
    }
}
