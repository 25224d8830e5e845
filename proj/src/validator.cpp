#include "pkgforge/validator.h"

#include <atomic>
#include <cctype>
#include <cmath>
#include <thread>

#include <json.hpp>

#include "pkgforge/prompt.h"
#include "pkgforge/util.h"

namespace pkgforge {

using json = nlohmann::json;

namespace {

// Rewrites bare True/False/None tokens outside string literals.
std::string normalize_python_literals(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_string = false;
    bool escaped = false;
    auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            out.push_back(c);
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') {
            in_string = true;
            out.push_back(c);
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) && (i == 0 || !is_word(text[i - 1]))) {
            std::size_t j = i;
            while (j < text.size() && is_word(text[j])) ++j;
            const auto word = text.substr(i, j - i);
            if (word == "True") out += "true";
            else if (word == "False") out += "false";
            else if (word == "None") out += "null";
            else out += word;
            i = j - 1;
            continue;
        }
        out.push_back(c);
    }
    return out;
}

std::optional<int> read_score(const json& v) {
    double d = 0;
    if (v.is_number()) {
        d = v.get<double>();
    } else if (v.is_string()) {
        try {
            d = std::stod(v.get<std::string>());
        } catch (...) {
            return std::nullopt;
        }
    } else {
        return std::nullopt;
    }
    if (!std::isfinite(d) || d != std::floor(d) || d < 1 || d > 10) return std::nullopt;
    return static_cast<int>(d);
}

std::optional<bool> read_bool(const json& v) {
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_string()) {
        const auto s = to_lower_ascii(trim(v.get<std::string>()));
        if (s == "true" || s == "yes") return true;
        if (s == "false" || s == "no") return false;
    }
    return std::nullopt;
}

std::optional<ParsedVerdict> verdict_from(const json& obj) {
    if (!obj.is_object() || !obj.contains("acceptability_score")) return std::nullopt;
    ParsedVerdict v;
    auto score = read_score(obj["acceptability_score"]);
    if (!score) return std::nullopt;
    v.score = *score;

    const json* reason = &obj;
    if (auto it = obj.find("reason"); it != obj.end() && it->is_object()) reason = &*it;
    auto acc_it = reason->find("accurate");
    if (acc_it == reason->end()) return std::nullopt;
    auto accurate = read_bool(*acc_it);
    if (!accurate) return std::nullopt;
    v.accurate = *accurate;

    if (auto alt = reason->find("alternative"); alt != reason->end() && alt->is_string()) {
        auto text = trim(alt->get<std::string>());
        if (!text.empty()) v.alternative = std::move(text);
    }
    if (v.accurate) {
        v.alternative.reset();
    } else if (!v.alternative) {
        return std::nullopt;
    }
    return v;
}

std::optional<ParsedVerdict> verdict_from_document(const json& doc) {
    if (!doc.is_object()) return std::nullopt;
    if (auto v = verdict_from(doc)) return v;
    for (const auto& [name, value] : doc.items()) {
        if (auto v = verdict_from(value)) return v;
    }
    return std::nullopt;
}

constexpr std::string_view kRetrySuffix = "\n\nRespond with the JSON object only.";

}  // namespace

std::optional<ParsedVerdict> parse_judgment_response(std::string_view raw) {
    const std::string cleaned = normalize_python_literals(raw);
    json doc = json::parse(cleaned, nullptr, false);
    if (!doc.is_discarded()) {
        if (auto v = verdict_from_document(doc)) return v;
    }
    if (auto span = extract_json_object(cleaned)) {
        json inner = json::parse(*span, nullptr, false);
        if (!inner.is_discarded()) return verdict_from_document(inner);
    }
    return std::nullopt;
}

JudgeBatch judge_edges(const KnowledgeGraph& graph, LlmGateway& gateway, const JudgeOptions& options) {
    std::vector<const Edge*> todo;
    for (const auto& [key, edge] : graph.edges()) {
        if (edge.source == EdgeSource::Generated) todo.push_back(&edge);
    }

    struct Slot {
        std::optional<EdgeJudgment> judgment;
        std::optional<std::string> error;
    };
    std::vector<Slot> slots(todo.size());

    auto judge_one = [&](std::size_t i) {
        const Edge& edge = *todo[i];
        const auto* subject = graph.find_product(edge.subject_id);
        const auto* object = graph.find_product(edge.object_id);
        try {
            const auto prompt = render_validation_prompt(subject->title.empty() ? subject->node_id : subject->title,
                                                         object->title.empty() ? object->node_id : object->title,
                                                         edge.predicate);
            std::optional<ParsedVerdict> verdict;
            for (int attempt = 0; attempt < 2 && !verdict; ++attempt) {
                std::string text = prompt.text;
                if (attempt > 0) text += kRetrySuffix;
                const auto req = make_request(std::move(text), options.temperature, options.max_output_tokens);
                verdict = parse_judgment_response(gateway.complete(req).text);
            }
            if (!verdict) {
                slots[i].error = "unparseable judgment";
                return;
            }
            EdgeJudgment j;
            j.edge_key = edge.key();
            j.acceptability_score = verdict->score;
            j.rationale_accurate = verdict->accurate;
            j.alternative_rationale = verdict->alternative;
            slots[i].judgment = std::move(j);
        } catch (const std::exception& e) {
            slots[i].error = e.what();
        }
    };

    const int workers = std::max(1, options.workers > 0 ? options.workers : gateway.config().max_in_flight);
    if (workers == 1 || todo.size() < 2) {
        for (std::size_t i = 0; i < todo.size(); ++i) judge_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers), todo.size());
        for (std::size_t w = 0; w < n; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < todo.size(); i = next.fetch_add(1)) judge_one(i);
            });
        }
    }

    JudgeBatch batch;
    for (std::size_t i = 0; i < todo.size(); ++i) {
        if (slots[i].judgment) {
            batch.judgments.push_back(std::move(*slots[i].judgment));
        } else {
            batch.missing.push_back(todo[i]->key());
            batch.errors.emplace_back(todo[i]->key(), slots[i].error.value_or("unknown error"));
        }
    }
    return batch;
}

ValidationReport compute_report(const std::vector<EdgeJudgment>& judgments) {
    ValidationReport r;
    r.judged_edge_count = judgments.size();
    if (judgments.empty()) return r;
    double sum = 0.0;
    std::size_t inaccurate = 0;
    for (const auto& j : judgments) {
        sum += j.acceptability_score;
        if (!j.rationale_accurate) ++inaccurate;
    }
    r.average_edge_score = sum / static_cast<double>(judgments.size());
    r.relation_imprecise_rate = static_cast<double>(inaccurate) / static_cast<double>(judgments.size());
    return r;
}

PruneSummary apply_pruning(KnowledgeGraph& graph, const std::vector<EdgeJudgment>& judgments, int threshold) {
    if (threshold < 1 || threshold > 10) throw GraphError("prune threshold must lie in [1,10]");
    PruneSummary summary;
    std::set<EdgeKey> judged;
    for (const auto& j : judgments) {
        Edge* e = graph.find_edge(j.edge_key);
        if (e == nullptr || e->source != EdgeSource::Generated) continue;
        judged.insert(j.edge_key);
        e->score = j.acceptability_score;
        e->rationale_accurate = j.rationale_accurate;
        if (j.acceptability_score < threshold) {
            graph.remove_edge(j.edge_key);
            ++summary.edges_removed;
        }
    }
    std::set<std::string, std::less<>> connected;
    for (const auto& [key, e] : graph.edges()) {
        if (e.source == EdgeSource::Generated && !judged.contains(key)) ++summary.unjudged_edges;
        if (e.source == EdgeSource::Generated || e.source == EdgeSource::SelfLoop) {
            connected.insert(e.subject_id);
            connected.insert(e.object_id);
        }
    }
    std::set<std::string, std::less<>> orphans;
    for (const auto& [id, node] : graph.products()) {
        if (!node.is_seed && !connected.contains(id)) orphans.insert(id);
    }
    summary.nodes_removed = graph.remove_products(orphans);
    return summary;
}

FixSummary apply_rationale_fixes(KnowledgeGraph& graph, const std::vector<EdgeJudgment>& judgments) {
    FixSummary summary;
    for (const auto& j : judgments) {
        if (j.rationale_accurate || !j.alternative_rationale) continue;
        const Edge* before = graph.find_edge(j.edge_key);
        if (before == nullptr || before->source != EdgeSource::Generated) continue;
        const bool existed = graph.find_edge(EdgeKey(j.edge_key.subject_id, *j.alternative_rationale,
                                                     j.edge_key.object_id)) != nullptr &&
                             !(EdgeKey(j.edge_key.subject_id, *j.alternative_rationale, j.edge_key.object_id) ==
                               j.edge_key);
        auto moved = graph.rewrite_predicate(j.edge_key, *j.alternative_rationale);
        if (!moved) continue;
        Edge* after = graph.find_edge(*moved);
        if (!after->score || j.acceptability_score > *after->score) after->score = j.acceptability_score;
        after->rationale_accurate = true;
        ++summary.rewritten;
        if (existed) ++summary.collapsed;
        summary.moved.emplace(j.edge_key, *moved);
    }
    return summary;
}

RefineResult refine_loop(KnowledgeGraph graph, LlmGateway& gateway, const RefineOptions& options) {
    if (options.max_iterations < 1) throw GraphError("max_iterations must be >= 1");
    RefineResult result;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        auto batch = judge_edges(graph, gateway, options.judge);
        if (batch.judgments.empty() && !batch.errors.empty()) {
            throw GatewayError(GatewayErrorKind::Transport,
                               "every judgment failed in iteration " + std::to_string(iter) + "; first error: " +
                                   batch.errors.front().second);
        }
        auto report = compute_report(batch.judgments);
        report.iteration_index = static_cast<std::size_t>(iter);
        report.missing_judgment_count = batch.missing.size();

        const auto fixes = apply_rationale_fixes(graph, batch.judgments);
        report.rewritten_edge_count = fixes.rewritten;

        // judgments now refer to where the rewritten edges live
        std::vector<EdgeJudgment> remapped = batch.judgments;
        for (auto& j : remapped) {
            if (auto it = fixes.moved.find(j.edge_key); it != fixes.moved.end()) {
                j.edge_key = it->second;
                j.rationale_accurate = true;
                j.alternative_rationale.reset();
            }
        }
        // collapsed rewrites share a key; the best verdict decides its fate
        std::map<EdgeKey, EdgeJudgment> best;
        for (auto& j : remapped) {
            auto [it, inserted] = best.try_emplace(j.edge_key, j);
            if (!inserted && j.acceptability_score > it->second.acceptability_score) it->second = j;
        }
        remapped.clear();
        for (auto& [key, j] : best) remapped.push_back(std::move(j));

        const auto pruned = apply_pruning(graph, remapped, options.threshold);
        report.pruned_edge_count = pruned.edges_removed;
        report.pruned_node_count = pruned.nodes_removed;
        result.reports.push_back(report);

        const bool nothing_judged = report.judged_edge_count == 0;
        const bool met = report.average_edge_score && *report.average_edge_score >= options.targets.min_avg_score &&
                         report.relation_imprecise_rate <= options.targets.max_imprecise_rate;
        if (met || nothing_judged) break;
    }
    result.graph = std::move(graph);
    return result;
}

std::string report_to_json_line(const ValidationReport& r) {
    nlohmann::ordered_json j = {
        {"iteration", r.iteration_index},
        {"average_edge_score", r.average_edge_score ? nlohmann::ordered_json(*r.average_edge_score) : nullptr},
        {"relation_imprecise_rate", r.relation_imprecise_rate},
        {"imprecise_rate_denominator", "judged_edges"},
        {"judged_edge_count", r.judged_edge_count},
        {"missing_judgment_count", r.missing_judgment_count},
        {"rewritten_edge_count", r.rewritten_edge_count},
        {"pruned_edge_count", r.pruned_edge_count},
        {"pruned_node_count", r.pruned_node_count},
    };
    return j.dump();
}

ValidationReport report_from_json_line(std::string_view line) {
    const json j = json::parse(line);
    ValidationReport r;
    r.iteration_index = j.at("iteration").get<std::size_t>();
    if (!j.at("average_edge_score").is_null()) r.average_edge_score = j["average_edge_score"].get<double>();
    r.relation_imprecise_rate = j.at("relation_imprecise_rate").get<double>();
    r.judged_edge_count = j.at("judged_edge_count").get<std::size_t>();
    r.missing_judgment_count = j.value("missing_judgment_count", std::size_t{0});
    r.rewritten_edge_count = j.value("rewritten_edge_count", std::size_t{0});
    r.pruned_edge_count = j.value("pruned_edge_count", std::size_t{0});
    r.pruned_node_count = j.value("pruned_node_count", std::size_t{0});
    return r;
}

}  // namespace pkgforge
