#include "pkgforge/pipeline.h"

#include <atomic>
#include <csignal>
#include <cstdio>
#include <sstream>
#include <thread>

#include <pthread.h>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "pkgforge/graph_io.h"
#include "pkgforge/graph_parse.h"
#include "pkgforge/mapper.h"
#include "pkgforge/server.h"
#include "pkgforge/util.h"

namespace pkgforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const fs::path& p) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out) {
    if (!obj.contains(key) || obj[key].is_null()) return;
    try {
        out = obj[key].get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config field '") + key + "' has the wrong type");
    }
}

void read_path(const json& obj, const char* key, const fs::path& base, fs::path& out) {
    std::string s;
    read_opt(obj, key, s);
    if (!s.empty()) out = resolve(base, s);
}

const json& section(const json& doc, const char* key) {
    static const json empty = json::object();
    if (!doc.contains(key)) return empty;
    if (!doc[key].is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
    return doc[key];
}

fs::path out_path(const PipelineConfig& c, std::string_view name) { return c.output_dir / std::string(name); }

fs::path input_or(const CommandArgs& args, const fs::path& fallback) { return args.in ? *args.in : fallback; }
fs::path output_or(const CommandArgs& args, const fs::path& fallback) { return args.out ? *args.out : fallback; }

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

KnowledgeGraph read_graph(const fs::path& p) {
    if (!fs::exists(p)) throw IoError("graph file " + p.string() + " does not exist");
    return from_jsonlines(read_file(p));
}

struct SeedOutcome {
    std::optional<KnowledgeGraph> subgraph;
    ParseStage stage = ParseStage::Failed;
    std::string error;
};

SeedOutcome generate_one(LlmGateway& gateway, const PromptTemplate& tmpl, const SeedProduct& seed,
                         const GenerationConfig& gen) {
    SeedOutcome out;
    try {
        const auto prompt = render_generation_prompt(tmpl, seed, gen.k);
        const auto first = gateway.complete(make_request(prompt.text, gen.temperature, gen.max_output_tokens));
        auto parsed = parse_generation_response(first.text, seed);
        if (parsed.ok()) {
            out.subgraph = std::move(parsed.subgraph);
            out.stage = parsed.stage;
            return out;
        }
        // re-ask once with the format indicator restated
        const auto reask_text = prompt.text + "\n\n" + tmpl.format_indicator;
        const auto second = gateway.complete(make_request(reask_text, gen.temperature, gen.max_output_tokens));
        auto reparsed = parse_generation_response(second.text, seed);
        if (reparsed.ok()) {
            out.subgraph = std::move(reparsed.subgraph);
            out.stage = ParseStage::Reasked;
            return out;
        }
        out.error = reparsed.error.empty() ? parsed.error : reparsed.error;
    } catch (const GatewayError& e) {
        out.error = e.what();
    } catch (const PromptError& e) {
        out.error = e.what();
    }
    out.stage = ParseStage::Failed;
    return out;
}

std::string fmt_opt(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : "n/a"; }
std::string fmt_opt(const std::optional<double>& v, int precision) {
    if (!v) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, *v);
    return buf;
}

}  // namespace

PipelineConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
    const auto doc = json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ConfigError("config is not a JSON object");

    PipelineConfig c;
    read_path(doc, "template", base_dir, c.template_path);
    read_path(doc, "seeds", base_dir, c.seeds_path);
    read_path(doc, "catalog", base_dir, c.catalog_path);
    c.output_dir = resolve(base_dir, c.output_dir);
    read_path(doc, "output_dir", base_dir, c.output_dir);

    const auto& g = section(doc, "gateway");
    std::string mode = "replay";
    read_opt(g, "mode", mode);
    if (mode == "replay") {
        c.gateway.mode = BackendMode::Replay;
    } else if (mode == "live") {
        c.gateway.mode = BackendMode::Live;
    } else {
        throw ConfigError("gateway.mode must be 'live' or 'replay'");
    }
    read_opt(g, "endpoint_url", c.gateway.endpoint_url);
    read_opt(g, "auth_token_env_var", c.gateway.auth_token_env_var);
    read_path(g, "fixtures_dir", base_dir, c.gateway.fixtures_dir);
    read_opt(g, "max_in_flight", c.gateway.max_in_flight);
    read_opt(g, "max_retries", c.gateway.max_retries);
    read_opt(g, "timeout_ms", c.gateway.timeout_ms);
    read_opt(g, "retry_backoff_ms", c.gateway.retry_backoff_ms);

    const auto& gen = section(doc, "generation");
    read_opt(gen, "k", c.generation.k);
    read_opt(doc, "k", c.generation.k);
    read_opt(gen, "temperature", c.generation.temperature);
    read_opt(gen, "max_output_tokens", c.generation.max_output_tokens);
    if (c.generation.k < 1) throw ConfigError("k must be >= 1");

    const auto& v = section(doc, "validation");
    read_opt(v, "prune_threshold", c.validation.prune_threshold);
    read_opt(v, "max_iterations", c.validation.max_iterations);
    read_opt(v, "min_avg_score", c.validation.targets.min_avg_score);
    read_opt(v, "max_imprecise_rate", c.validation.targets.max_imprecise_rate);
    read_opt(v, "temperature", c.validation.temperature);
    read_opt(v, "max_output_tokens", c.validation.max_output_tokens);
    if (c.validation.prune_threshold < 1 || c.validation.prune_threshold > 10) {
        throw ConfigError("validation.prune_threshold must be in [1,10]");
    }
    if (c.validation.max_iterations < 1) throw ConfigError("validation.max_iterations must be >= 1");

    const auto& m = section(doc, "mapping");
    read_opt(m, "threshold", c.mapping.threshold);
    read_opt(m, "max_matches", c.mapping.max_matches);
    read_opt(m, "embedder", c.mapping.embedder);
    read_opt(m, "dimension", c.mapping.dimension);
    read_opt(m, "endpoint_url", c.mapping.endpoint_url);
    read_opt(m, "auth_token_env_var", c.mapping.auth_token_env_var);
    std::string index_mode = "exact";
    read_opt(m, "index_mode", index_mode);
    try {
        c.mapping.index_mode = index_mode_from_string(index_mode);
    } catch (const IndexError& e) {
        throw ConfigError(std::string("mapping.index_mode: ") + e.what());
    }
    if (!(c.mapping.threshold >= 0.0)) throw ConfigError("mapping.threshold must be >= 0");
    if (c.mapping.max_matches == 0) throw ConfigError("mapping.max_matches must be >= 1");
    if (c.mapping.embedder != "hashing" && c.mapping.embedder != "remote") {
        throw ConfigError("mapping.embedder must be 'hashing' or 'remote'");
    }

    const auto& s = section(doc, "serving");
    read_opt(s, "host", c.serving.host);
    read_opt(s, "port", c.serving.port);
    read_opt(s, "default_k", c.serving.default_k);
    read_opt(s, "worker_threads", c.serving.worker_threads);
    read_path(s, "cache", base_dir, c.serving.cache_path);
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    return parse_config(text, path.parent_path());
}

std::vector<SeedProduct> load_seeds(const fs::path& path) {
    if (path.empty()) throw ConfigError("no seeds file configured");
    if (!fs::exists(path)) throw ConfigError("seeds file " + path.string() + " does not exist");
    const auto text = read_file(path);
    std::vector<SeedProduct> seeds;
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        const auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw ConfigError("seeds line " + std::to_string(n) + " is not JSON");
        SeedProduct s;
        if (j.contains("id")) {
            s.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
        } else if (j.contains("seed_id")) {
            s.id = j["seed_id"].is_string() ? j["seed_id"].get<std::string>() : j["seed_id"].dump();
        }
        s.title = j.value("title", "");
        if (s.id.empty() || trim(s.title).empty()) {
            throw ConfigError("seeds line " + std::to_string(n) + " needs an id and a non-empty title");
        }
        seeds.push_back(std::move(s));
    }
    return seeds;
}

std::unique_ptr<EmbeddingProvider> make_embedder(const MappingConfig& config) {
    if (config.embedder == "remote") {
        RemoteEmbedderConfig rc;
        rc.endpoint_url = config.endpoint_url;
        rc.dimension = config.dimension;
        rc.auth_token_env_var = config.auth_token_env_var;
        return std::make_unique<RemoteEmbedder>(rc);
    }
    return std::make_unique<HashingEmbedder>(config.dimension);
}

CommandResult cmd_generate(const PipelineConfig& config, const CommandArgs& args) {
    const PromptTemplate tmpl =
        config.template_path.empty() ? default_generation_template() : load_template(config.template_path);
    if (auto v = validate_template(tmpl); !v.empty()) {
        throw ConfigError("template " + std::string(component_name(v.front().component)) + ": " + v.front().message);
    }
    const auto seeds = load_seeds(config.seeds_path);
    check_backend_config(config.gateway);
    LlmGateway gateway(config.gateway);

    std::vector<SeedOutcome> outcomes(seeds.size());
    std::atomic<std::size_t> next{0};
    {
        const auto workers = std::min<std::size_t>(std::max(config.gateway.max_in_flight, 1), seeds.size());
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < seeds.size(); i = next++) {
                    outcomes[i] = generate_one(gateway, tmpl, seeds[i], config.generation);
                }
            });
        }
    }

    KnowledgeGraph graph;
    std::string report;
    std::size_t failed = 0;
    std::size_t recovered = 0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        auto& o = outcomes[i];
        if (o.subgraph) merge_subgraph(graph, *o.subgraph);
        if (o.stage == ParseStage::Strict) continue;
        json line;
        line["seed_id"] = seeds[i].id;
        line["stage"] = to_string(o.stage);
        line["recovered"] = o.stage != ParseStage::Failed;
        if (!o.error.empty()) line["error"] = o.error;
        report += line.dump() + "\n";
        if (o.stage == ParseStage::Failed) {
            ++failed;
            spdlog::warn("seed {} failed: {}", seeds[i].id, o.error);
        } else {
            ++recovered;
        }
    }

    const auto graph_out = output_or(args, out_path(config, artifacts::kInitialGraph));
    ensure_parent(graph_out);
    write_file_atomic(graph_out, to_jsonlines(graph));
    const auto report_out = out_path(config, artifacts::kGenerateReport);
    ensure_parent(report_out);
    write_file_atomic(report_out, report);

    std::ostringstream s;
    s << "generate seeds=" << seeds.size() << " ok=" << seeds.size() - failed << " recovered=" << recovered
      << " failed=" << failed << " nodes=" << graph.product_count() << " edges=" << graph.edge_count()
      << " out=" << graph_out.string();
    return {failed > 0 ? kExitPartial : kExitOk, s.str()};
}

CommandResult cmd_validate(const PipelineConfig& config, const CommandArgs& args) {
    const auto in = input_or(args, out_path(config, artifacts::kInitialGraph));
    auto graph = read_graph(in);
    check_backend_config(config.gateway);
    LlmGateway gateway(config.gateway);

    RefineOptions opts;
    opts.threshold = config.validation.prune_threshold;
    opts.max_iterations = config.validation.max_iterations;
    opts.targets = config.validation.targets;
    opts.judge.temperature = config.validation.temperature;
    opts.judge.max_output_tokens = config.validation.max_output_tokens;
    auto result = refine_loop(std::move(graph), gateway, opts);

    std::string reports;
    std::size_t missing = 0;
    for (const auto& r : result.reports) {
        reports += report_to_json_line(r) + "\n";
        missing += r.missing_judgment_count;
    }
    const auto graph_out = output_or(args, out_path(config, artifacts::kValidatedGraph));
    ensure_parent(graph_out);
    write_file_atomic(graph_out, to_jsonlines(result.graph));
    const auto reports_out = graph_out.parent_path() / std::string(artifacts::kValidationReports);
    write_file_atomic(reports_out, reports);

    std::ostringstream s;
    s << "validate iterations=" << result.reports.size();
    if (!result.reports.empty()) {
        const auto& first = result.reports.front();
        s << " avg_edge_score=" << fmt_opt(first.average_edge_score, 4)
          << " imprecise_rate=" << fmt_opt(std::optional<double>(first.relation_imprecise_rate), 4);
    }
    s << " missing=" << missing << " nodes=" << result.graph.product_count()
      << " edges=" << result.graph.edge_count() << " out=" << graph_out.string();
    return {missing > 0 ? kExitPartial : kExitOk, s.str()};
}

CommandResult cmd_map(const PipelineConfig& config, const CommandArgs& args) {
    const auto in = input_or(args, out_path(config, artifacts::kValidatedGraph));
    auto graph = read_graph(in);
    if (config.catalog_path.empty() || !fs::exists(config.catalog_path)) {
        throw ConfigError("catalog file '" + config.catalog_path.string() + "' does not exist");
    }
    const auto catalog = load_catalog(config.catalog_path);
    const auto loops = add_self_loops(graph);
    const auto embedder = make_embedder(config.mapping);
    const auto index = build_index(catalog, *embedder, config.mapping.index_mode);
    const auto mappings = map_nodes(graph, index, *embedder, config.mapping.threshold, config.mapping.max_matches);
    const auto fused = fuse_graph(graph, mappings, catalog);

    const auto graph_out = output_or(args, out_path(config, artifacts::kFusedGraph));
    ensure_parent(graph_out);
    write_file_atomic(graph_out, to_jsonlines(fused));
    write_file_atomic(graph_out.parent_path() / std::string(artifacts::kUnmapped),
                      unmapped_audit_jsonl(graph, mappings));

    std::size_t unmapped = 0;
    for (const auto& m : mappings) unmapped += m.mapped ? 0 : 1;
    std::ostringstream s;
    s << "map nodes=" << graph.product_count() << " mapped=" << mappings.size() - unmapped
      << " unmapped=" << unmapped << " self_loops=" << loops << " enterprise_nodes=" << fused.product_count()
      << " enterprise_edges=" << fused.edge_count() << " out=" << graph_out.string();
    return {kExitOk, s.str()};
}

CommandResult cmd_compile(const PipelineConfig& config, const CommandArgs& args) {
    const auto in = input_or(args, out_path(config, artifacts::kFusedGraph));
    const auto fused = read_graph(in);
    const auto cache = compile_cache(fused);
    fs::path cache_out = args.out ? *args.out
                                  : (config.serving.cache_path.empty() ? out_path(config, artifacts::kCache)
                                                                       : config.serving.cache_path);
    ensure_parent(cache_out);
    cache.save(cache_out);
    write_file_atomic(cache_out.parent_path() / std::string(artifacts::kCacheDebug), cache_debug_jsonl(cache));

    std::ostringstream s;
    s << "compile item_entries=" << cache.metadata().item_entry_count
      << " group_entries=" << cache.metadata().group_entry_count << " snapshot=" << cache.snapshot_hash()
      << " out=" << cache_out.string();
    return {kExitOk, s.str()};
}

CommandResult cmd_serve(const PipelineConfig& config, const CommandArgs& args) {
    const fs::path cache_path = args.in ? *args.in
                                        : (config.serving.cache_path.empty() ? out_path(config, artifacts::kCache)
                                                                             : config.serving.cache_path);
    auto cache = std::make_shared<const ServingCache>(ServingCache::load(cache_path));

    ServerOptions opts;
    opts.host = config.serving.host;
    opts.port = config.serving.port;
    opts.default_k = config.serving.default_k;
    opts.worker_threads = config.serving.worker_threads;
    const auto reports_path = out_path(config, artifacts::kValidationReports);
    if (fs::exists(reports_path)) {
        std::istringstream in(read_file(reports_path));
        std::string line;
        std::string last;
        while (std::getline(in, line)) {
            if (!trim(line).empty()) last = line;
        }
        if (!last.empty()) opts.latest_report_json = last;
    }

    // signals are taken synchronously by one watcher thread
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGHUP);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    RecommendationServer server(cache, opts);
    const int port = server.bind();
    spdlog::info("serving {} entries on {}:{} (snapshot {})", cache->metadata().entry_count(), opts.host, port,
                 cache->snapshot_hash());
    server.start();

    for (;;) {
        int sig = 0;
        if (sigwait(&set, &sig) != 0) continue;
        if (sig == SIGHUP) {
            if (auto err = server.reload_cache(cache_path)) {
                spdlog::error("reload rejected, keeping snapshot {}: {}", server.snapshot()->snapshot_hash(), *err);
            } else {
                spdlog::info("reloaded snapshot {}", server.snapshot()->snapshot_hash());
            }
            continue;
        }
        break;
    }
    server.stop();
    return {kExitOk, "serve stopped port=" + std::to_string(port)};
}

PipelineStats collect_stats(const std::optional<KnowledgeGraph>& initial,
                            const std::optional<ValidationReport>& first_report,
                            const std::optional<KnowledgeGraph>& fused) {
    PipelineStats s;
    if (initial) {
        s.nodes = initial->product_count() + initial->groups().size();
        s.edges = initial->edge_count() + initial->audience_edges().size();
    }
    if (first_report) {
        s.avg_edge_score_before_pruning = first_report->average_edge_score;
        s.relation_imprecise_rate_before_pruning = first_report->relation_imprecise_rate;
    }
    if (fused) {
        s.enterprise_nodes = fused->product_count() + fused->groups().size();
        s.enterprise_edges = fused->edge_count() + fused->audience_edges().size();
    }
    return s;
}

std::string format_stats_table(const PipelineStats& stats) {
    std::string out;
    for (std::size_t i = 0; i < kStatsColumns.size(); ++i) {
        if (i) out += '\t';
        out += kStatsColumns[i];
    }
    out += '\n';
    out += fmt_opt(stats.nodes) + '\t' + fmt_opt(stats.edges) + '\t' +
           fmt_opt(stats.avg_edge_score_before_pruning, 2) + '\t' +
           fmt_opt(stats.relation_imprecise_rate_before_pruning, 4) + '\t' + fmt_opt(stats.enterprise_nodes) + '\t' +
           fmt_opt(stats.enterprise_edges) + '\n';
    return out;
}

CommandResult cmd_stats(const PipelineConfig& config, const CommandArgs& args) {
    if (args.in) {
        const auto bytes = read_file(*args.in);
        std::ostringstream s;
        if (bytes.starts_with("PKGCACHE")) {
            const auto cache = ServingCache::deserialize(bytes);
            const auto& m = cache.metadata();
            std::printf("item_entries\tgroup_entries\titem_table_size\tsnapshot\n%zu\t%zu\t%zu\t%s\n",
                        m.item_entry_count, m.group_entry_count, m.item_table_size, cache.snapshot_hash().c_str());
            s << "stats kind=cache item_entries=" << m.item_entry_count << " group_entries=" << m.group_entry_count
              << " snapshot=" << cache.snapshot_hash();
            return {kExitOk, s.str()};
        }
        const auto graph = from_jsonlines(bytes);
        const auto gs = compute_stats(graph);
        std::printf("nodes\tgroups\tedges\taudience_edges\toverlong_edges\n%zu\t%zu\t%zu\t%zu\t%zu\n", gs.node_count,
                    gs.group_count, gs.edge_count, gs.audience_edge_count, gs.overlong_edge_count);
        std::printf("\ntop predicates\n");
        for (std::size_t i = 0; i < std::min<std::size_t>(10, gs.edge_predicate_distribution.size()); ++i) {
            std::printf("%zu\t%s\n", gs.edge_predicate_distribution[i].second,
                        gs.edge_predicate_distribution[i].first.c_str());
        }
        std::printf("\ntop audiences\n");
        for (std::size_t i = 0; i < std::min<std::size_t>(10, gs.audience_distribution.size()); ++i) {
            std::printf("%zu\t%s\n", gs.audience_distribution[i].second, gs.audience_distribution[i].first.c_str());
        }
        s << "stats kind=graph nodes=" << gs.node_count << " groups=" << gs.group_count << " edges=" << gs.edge_count
          << " audience_edges=" << gs.audience_edge_count;
        return {kExitOk, s.str()};
    }

    std::optional<KnowledgeGraph> initial;
    std::optional<KnowledgeGraph> fused;
    std::optional<ValidationReport> first;
    if (const auto p = out_path(config, artifacts::kInitialGraph); fs::exists(p)) initial = read_graph(p);
    if (const auto p = out_path(config, artifacts::kFusedGraph); fs::exists(p)) fused = read_graph(p);
    if (const auto p = out_path(config, artifacts::kValidationReports); fs::exists(p)) {
        std::istringstream in(read_file(p));
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            first = report_from_json_line(line);
            break;
        }
    }
    const auto stats = collect_stats(initial, first, fused);
    std::fputs(format_stats_table(stats).c_str(), stdout);
    std::ostringstream s;
    s << "stats kind=pipeline";
    s << " nodes=" << fmt_opt(stats.nodes) << " edges=" << fmt_opt(stats.edges)
      << " avg_edge_score_before_pruning=" << fmt_opt(stats.avg_edge_score_before_pruning, 4)
      << " relation_imprecise_rate_before_pruning=" << fmt_opt(stats.relation_imprecise_rate_before_pruning, 4)
      << " enterprise_nodes=" << fmt_opt(stats.enterprise_nodes)
      << " enterprise_edges=" << fmt_opt(stats.enterprise_edges);
    return {kExitOk, s.str()};
}

CommandResult cmd_export(const PipelineConfig& config, const CommandArgs& args) {
    const auto in = input_or(args, out_path(config, artifacts::kFusedGraph));
    const auto graph = read_graph(in);
    const auto format = graph_format_from_string(args.format.value_or("ntriples"));
    fs::path out;
    if (args.out) {
        out = *args.out;
    } else {
        const auto stem = in.stem().string() + ".export";
        out = config.output_dir /
              (format == GraphFormat::VizCsv ? stem + ".csv" : stem + (format == GraphFormat::NTriples ? ".nt" : ".jsonl"));
    }
    if (format != GraphFormat::VizCsv) ensure_parent(out);
    export_graph(graph, format, out);
    std::ostringstream s;
    s << "export format=" << to_string(format) << " nodes=" << graph.product_count() << " edges=" << graph.edge_count()
      << " out=" << out.string();
    return {kExitOk, s.str()};
}

}  // namespace pkgforge
