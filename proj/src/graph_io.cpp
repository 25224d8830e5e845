#include "pkgforge/graph_io.h"

#include <array>
#include <cstdio>
#include <map>

#include <json.hpp>

#include "pkgforge/util.h"

namespace pkgforge {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

GraphFormat graph_format_from_string(std::string_view s) {
    if (s == "jsonlines" || s == "jsonl") return GraphFormat::JsonLines;
    if (s == "ntriples" || s == "nt") return GraphFormat::NTriples;
    if (s == "viz_csv" || s == "csv") return GraphFormat::VizCsv;
    throw GraphError("unknown graph format '" + std::string(s) + "'");
}

std::string_view to_string(GraphFormat f) {
    switch (f) {
        case GraphFormat::JsonLines: return "jsonlines";
        case GraphFormat::NTriples: return "ntriples";
        case GraphFormat::VizCsv: return "viz_csv";
    }
    return "jsonlines";
}

namespace {

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        fn(line_no, line);
        pos = nl + 1;
    }
}

// Adds buffered edges/audience edges, converting graph errors into line errors.
template <typename Fn>
void at_line(std::size_t line, Fn&& fn) {
    try {
        fn();
    } catch (const GraphError& e) {
        throw GraphFormatError(line, e.what());
    } catch (const json::exception& e) {
        throw GraphFormatError(line, e.what());
    }
}

}  // namespace

// --- jsonlines --------------------------------------------------------------

std::string to_jsonlines(const KnowledgeGraph& graph) {
    std::string out;
    out += ojson{{"format", "pkgforge-graph"}, {"version", kGraphFormatVersion}}.dump() + "\n";
    for (const auto& [id, n] : graph.products()) {
        ojson line = {{"kind", "product"},      {"id", n.node_id},          {"title", n.title},
                      {"brand", n.brand},       {"type", n.product_type},   {"audience", n.audience},
                      {"is_seed", n.is_seed}};
        out += line.dump() + "\n";
    }
    for (const auto& [id, g] : graph.groups()) {
        out += ojson{{"kind", "group"}, {"id", g.group_id}, {"label", g.label}}.dump() + "\n";
    }
    for (const auto& [key, e] : graph.edges()) {
        ojson line = {{"kind", "edge"},
                      {"subject", e.subject_id},
                      {"predicate", e.predicate},
                      {"object", e.object_id},
                      {"word_count", e.word_count},
                      {"score", e.score ? ojson(*e.score) : ojson(nullptr)},
                      {"rationale_accurate", e.rationale_accurate ? ojson(*e.rationale_accurate) : ojson(nullptr)},
                      {"source", to_string(e.source)}};
        out += line.dump() + "\n";
    }
    for (const auto& a : graph.audience_edges()) {
        out += ojson{{"kind", "audience"}, {"group", a.group_id}, {"product", a.product_id}}.dump() + "\n";
    }
    return out;
}

KnowledgeGraph from_jsonlines(std::string_view text) {
    KnowledgeGraph g;
    bool saw_header = false;
    std::vector<std::pair<std::size_t, Edge>> edges;
    std::vector<std::pair<std::size_t, AudienceEdge>> audience;

    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        if (trim(line).empty()) return;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) throw GraphFormatError(line_no, "not a JSON object");
        if (!saw_header) {
            if (doc.value("format", "") != "pkgforge-graph") throw GraphFormatError(line_no, "missing format header");
            if (doc.value("version", 0) != kGraphFormatVersion) {
                throw GraphFormatError(line_no, "unsupported graph format version");
            }
            saw_header = true;
            return;
        }
        at_line(line_no, [&] {
            const auto kind = doc.at("kind").get<std::string>();
            if (kind == "product") {
                ProductNode n;
                n.node_id = doc.at("id").get<std::string>();
                n.title = doc.value("title", "");
                n.brand = doc.value("brand", "");
                n.product_type = doc.value("type", "");
                if (doc.contains("audience")) n.audience = doc["audience"].get<std::vector<std::string>>();
                n.is_seed = doc.value("is_seed", false);
                if (g.find_product(n.node_id) != nullptr) throw GraphError("duplicate product " + n.node_id);
                g.upsert_product(n);
            } else if (kind == "group") {
                g.add_group({doc.at("id").get<std::string>(), doc.value("label", "")});
            } else if (kind == "edge") {
                Edge e = make_edge(doc.at("subject").get<std::string>(), doc.at("predicate").get<std::string>(),
                                   doc.at("object").get<std::string>(),
                                   edge_source_from_string(doc.value("source", "generated")));
                if (doc.contains("score") && !doc["score"].is_null()) e.score = doc["score"].get<int>();
                if (doc.contains("rationale_accurate") && !doc["rationale_accurate"].is_null()) {
                    e.rationale_accurate = doc["rationale_accurate"].get<bool>();
                }
                edges.emplace_back(line_no, std::move(e));
            } else if (kind == "audience") {
                audience.emplace_back(line_no,
                                      AudienceEdge{doc.at("group").get<std::string>(), doc.at("product").get<std::string>()});
            } else {
                throw GraphError("unknown record kind '" + kind + "'");
            }
        });
    });
    if (!saw_header) throw GraphFormatError(1, "empty graph file");
    for (auto& [line, e] : edges) {
        at_line(line, [&] {
            if (!g.add_edge(e)) throw GraphError("duplicate edge");
        });
    }
    for (auto& [line, a] : audience) {
        at_line(line, [&] { g.add_audience_edge(a.group_id, a.product_id); });
    }
    return g;
}

// --- N-Triples --------------------------------------------------------------

namespace {

constexpr std::string_view kProductNs = "urn:pkgforge:product:";
constexpr std::string_view kGroupNs = "urn:pkgforge:group:";
constexpr std::string_view kRelNs = "urn:pkgforge:rel:";
constexpr std::string_view kEdgeNs = "urn:pkgforge:edge:";
constexpr std::string_view kVocabNs = "urn:pkgforge:vocab#";

std::string iri(std::string_view ns, std::string_view local) {
    std::string s = "<";
    s += ns;
    s += percent_encode(local);
    s += ">";
    return s;
}

std::string vocab(std::string_view term) {
    std::string s = "<";
    s += kVocabNs;
    s += term;
    s += ">";
    return s;
}

std::string literal(std::string_view v) {
    std::string s = "\"";
    for (unsigned char c : v) {
        switch (c) {
            case '\\': s += "\\\\"; break;
            case '"': s += "\\\""; break;
            case '\n': s += "\\n"; break;
            case '\r': s += "\\r"; break;
            case '\t': s += "\\t"; break;
            default:
                if (c < 0x20 || c == 0x7f) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04X", c);
                    s += buf;
                } else {
                    s.push_back(static_cast<char>(c));
                }
        }
    }
    s += "\"";
    return s;
}

void triple(std::string& out, const std::string& s, const std::string& p, const std::string& o) {
    out += s;
    out += ' ';
    out += p;
    out += ' ';
    out += o;
    out += " .\n";
}

enum class TermKind { Iri, Literal, Blank };

struct Term {
    TermKind kind;
    std::string value;
};

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

class NTriplesLine {
public:
    NTriplesLine(std::string_view line, std::size_t line_no) : s_(line), line_(line_no) {}

    std::array<Term, 3> parse() {
        std::array<Term, 3> t{next_term(), next_term(), next_term()};
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] != '.') fail("expected ' .' terminator");
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] != '#') fail("trailing characters after '.'");
        if (t[0].kind == TermKind::Literal) fail("literal in subject position");
        if (t[1].kind != TermKind::Iri) fail("predicate must be an IRI");
        return t;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw GraphFormatError(line_, msg); }

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }

    Term next_term() {
        skip_ws();
        if (pos_ >= s_.size()) fail("unexpected end of line");
        const char c = s_[pos_];
        if (c == '<') {
            const auto end = s_.find('>', pos_);
            if (end == std::string_view::npos) fail("unterminated IRI");
            Term t{TermKind::Iri, std::string(s_.substr(pos_ + 1, end - pos_ - 1))};
            pos_ = end + 1;
            return t;
        }
        if (c == '_' && pos_ + 1 < s_.size() && s_[pos_ + 1] == ':') {
            const auto start = pos_;
            while (pos_ < s_.size() && s_[pos_] != ' ' && s_[pos_] != '\t') ++pos_;
            return {TermKind::Blank, std::string(s_.substr(start, pos_ - start))};
        }
        if (c == '"') return parse_literal();
        fail(std::string("unexpected character '") + c + "'");
    }

    Term parse_literal() {
        std::string v;
        ++pos_;
        while (true) {
            if (pos_ >= s_.size()) fail("unterminated literal");
            const char c = s_[pos_++];
            if (c == '"') break;
            if (c != '\\') {
                v.push_back(c);
                continue;
            }
            if (pos_ >= s_.size()) fail("dangling escape");
            const char e = s_[pos_++];
            switch (e) {
                case 't': v.push_back('\t'); break;
                case 'n': v.push_back('\n'); break;
                case 'r': v.push_back('\r'); break;
                case 'b': v.push_back('\b'); break;
                case 'f': v.push_back('\f'); break;
                case '"': v.push_back('"'); break;
                case '\'': v.push_back('\''); break;
                case '\\': v.push_back('\\'); break;
                case 'u':
                case 'U': {
                    const std::size_t len = e == 'u' ? 4 : 8;
                    if (pos_ + len > s_.size()) fail("short unicode escape");
                    std::uint32_t cp = 0;
                    for (std::size_t i = 0; i < len; ++i) {
                        const char h = s_[pos_ + i];
                        cp <<= 4;
                        if (h >= '0' && h <= '9') cp |= static_cast<std::uint32_t>(h - '0');
                        else if (h >= 'a' && h <= 'f') cp |= static_cast<std::uint32_t>(h - 'a' + 10);
                        else if (h >= 'A' && h <= 'F') cp |= static_cast<std::uint32_t>(h - 'A' + 10);
                        else fail("bad hex digit in unicode escape");
                    }
                    pos_ += len;
                    append_utf8(v, cp);
                    break;
                }
                default: fail(std::string("unknown escape \\") + e);
            }
        }
        // datatype or language tag carries no information we need
        if (pos_ + 1 < s_.size() && s_[pos_] == '^' && s_[pos_ + 1] == '^') {
            pos_ += 2;
            if (pos_ >= s_.size() || s_[pos_] != '<') fail("malformed datatype");
            const auto end = s_.find('>', pos_);
            if (end == std::string_view::npos) fail("unterminated datatype IRI");
            pos_ = end + 1;
        } else if (pos_ < s_.size() && s_[pos_] == '@') {
            while (pos_ < s_.size() && s_[pos_] != ' ' && s_[pos_] != '\t') ++pos_;
        }
        return {TermKind::Literal, std::move(v)};
    }

    std::string_view s_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

bool has_prefix(const Term& t, std::string_view ns) {
    return t.kind == TermKind::Iri && std::string_view(t.value).substr(0, ns.size()) == ns;
}

std::string local_of(const Term& t, std::string_view ns) { return percent_decode(std::string_view(t.value).substr(ns.size())); }

}  // namespace

std::string to_ntriples(const KnowledgeGraph& graph) {
    std::string out;
    for (const auto& [id, n] : graph.products()) {
        const auto s = iri(kProductNs, id);
        triple(out, s, vocab("title"), literal(n.title));
        if (!n.brand.empty()) triple(out, s, vocab("brand"), literal(n.brand));
        if (!n.product_type.empty()) triple(out, s, vocab("type"), literal(n.product_type));
        if (n.is_seed) triple(out, s, vocab("isSeed"), literal("true"));
        for (const auto& a : n.audience) triple(out, s, vocab("audience"), literal(a));
    }
    for (const auto& [id, g] : graph.groups()) triple(out, iri(kGroupNs, id), vocab("label"), literal(g.label));
    for (const auto& a : graph.audience_edges()) {
        triple(out, iri(kGroupNs, a.group_id), vocab("member"), iri(kProductNs, a.product_id));
    }
    std::size_t ordinal = 0;
    for (const auto& [key, e] : graph.edges()) {
        const auto s = iri(kProductNs, e.subject_id);
        const auto p = iri(kRelNs, e.predicate);
        const auto o = iri(kProductNs, e.object_id);
        triple(out, s, p, o);
        if (!e.score && !e.rationale_accurate && e.source == EdgeSource::Generated) continue;
        // reified statement for per-edge metadata
        const auto r = iri(kEdgeNs, std::to_string(ordinal++));
        triple(out, r, vocab("subject"), s);
        triple(out, r, vocab("predicate"), p);
        triple(out, r, vocab("object"), o);
        if (e.score) triple(out, r, vocab("score"), literal(std::to_string(*e.score)));
        if (e.rationale_accurate) triple(out, r, vocab("accurate"), literal(*e.rationale_accurate ? "true" : "false"));
        if (e.source != EdgeSource::Generated) triple(out, r, vocab("source"), literal(to_string(e.source)));
    }
    return out;
}

KnowledgeGraph from_ntriples(std::string_view text) {
    struct Stmt {
        std::size_t line;
        std::array<Term, 3> t;
    };
    std::vector<Stmt> stmts;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') return;
        stmts.push_back({line_no, NTriplesLine(line, line_no).parse()});
    });

    KnowledgeGraph g;
    std::map<std::string, ProductNode> products;
    std::vector<std::string> product_order;
    auto product_for = [&](const std::string& id) -> ProductNode& {
        auto [it, inserted] = products.try_emplace(id);
        if (inserted) {
            it->second.node_id = id;
            product_order.push_back(id);
        }
        return it->second;
    };
    auto expect_literal = [](const Stmt& st) -> const std::string& {
        if (st.t[2].kind != TermKind::Literal) throw GraphFormatError(st.line, "expected a literal object");
        return st.t[2].value;
    };

    struct Reified {
        std::size_t line = 0;
        std::optional<std::string> s, p, o, score, accurate, source;
    };
    std::map<std::string, Reified> reified;
    std::vector<const Stmt*> plain_edges;
    std::vector<const Stmt*> members;
    std::map<std::string, std::string> group_labels;
    std::vector<std::string> group_order;

    for (const auto& st : stmts) {
        const auto& [subj, pred, obj] = st.t;
        if (has_prefix(subj, kProductNs)) {
            const auto id = local_of(subj, kProductNs);
            if (has_prefix(pred, kRelNs)) {
                if (!has_prefix(obj, kProductNs)) throw GraphFormatError(st.line, "edge object is not a product IRI");
                plain_edges.push_back(&st);
                continue;
            }
            const std::string_view term = std::string_view(pred.value).substr(std::min(pred.value.size(), kVocabNs.size()));
            if (!has_prefix(pred, kVocabNs)) throw GraphFormatError(st.line, "unknown predicate <" + pred.value + ">");
            auto& n = product_for(id);
            if (term == "title") n.title = expect_literal(st);
            else if (term == "brand") n.brand = expect_literal(st);
            else if (term == "type") n.product_type = expect_literal(st);
            else if (term == "isSeed") n.is_seed = expect_literal(st) == "true";
            else if (term == "audience") n.audience.push_back(expect_literal(st));
            else throw GraphFormatError(st.line, "unknown product attribute '" + std::string(term) + "'");
        } else if (has_prefix(subj, kGroupNs)) {
            const auto id = local_of(subj, kGroupNs);
            if (pred.value == std::string(kVocabNs) + "label") {
                if (!group_labels.contains(id)) group_order.push_back(id);
                group_labels[id] = expect_literal(st);
            } else if (pred.value == std::string(kVocabNs) + "member") {
                if (!has_prefix(obj, kProductNs)) throw GraphFormatError(st.line, "member object is not a product IRI");
                members.push_back(&st);
            } else {
                throw GraphFormatError(st.line, "unknown group predicate <" + pred.value + ">");
            }
        } else if (has_prefix(subj, kEdgeNs)) {
            auto& r = reified[subj.value];
            if (r.line == 0) r.line = st.line;
            if (!has_prefix(pred, kVocabNs)) throw GraphFormatError(st.line, "unknown edge predicate <" + pred.value + ">");
            const std::string_view term = std::string_view(pred.value).substr(kVocabNs.size());
            if (term == "subject") r.s = obj.value;
            else if (term == "predicate") r.p = obj.value;
            else if (term == "object") r.o = obj.value;
            else if (term == "score") r.score = expect_literal(st);
            else if (term == "accurate") r.accurate = expect_literal(st);
            else if (term == "source") r.source = expect_literal(st);
            else throw GraphFormatError(st.line, "unknown edge attribute '" + std::string(term) + "'");
        } else {
            throw GraphFormatError(st.line, "unrecognized subject <" + subj.value + ">");
        }
    }

    for (const auto& id : product_order) g.upsert_product(products[id]);
    for (const auto& id : group_order) g.add_group({id, group_labels[id]});
    for (const Stmt* st : plain_edges) {
        at_line(st->line, [&] {
            auto subject = local_of(st->t[0], kProductNs);
            auto object = local_of(st->t[2], kProductNs);
            const auto source = subject == object ? EdgeSource::SelfLoop : EdgeSource::Generated;
            g.add_edge(make_edge(std::move(subject), local_of(st->t[1], kRelNs), std::move(object), source));
        });
    }
    for (const Stmt* st : members) {
        at_line(st->line, [&] { g.add_audience_edge(local_of(st->t[0], kGroupNs), local_of(st->t[2], kProductNs)); });
    }
    for (const auto& [name, r] : reified) {
        if (!r.s || !r.p || !r.o) throw GraphFormatError(r.line, "incomplete edge statement " + name);
        const Term s{TermKind::Iri, *r.s}, p{TermKind::Iri, *r.p}, o{TermKind::Iri, *r.o};
        if (!has_prefix(s, kProductNs) || !has_prefix(p, kRelNs) || !has_prefix(o, kProductNs)) {
            throw GraphFormatError(r.line, "edge statement " + name + " has malformed terms");
        }
        const EdgeKey key(local_of(s, kProductNs), local_of(p, kRelNs), local_of(o, kProductNs));
        at_line(r.line, [&] {
            // a loop edge is only legal once its source is known, so it may
            // not exist yet
            Edge* e = g.find_edge(key);
            if (e == nullptr) {
                if (!r.source) throw GraphError("edge statement " + name + " names an unknown triple");
                Edge fresh = make_edge(key.subject_id, local_of(p, kRelNs), key.object_id, edge_source_from_string(*r.source));
                g.add_edge(fresh);
                e = g.find_edge(key);
            }
            if (r.score) {
                const int sc = std::stoi(*r.score);
                if (sc < 1 || sc > 10) throw GraphError("score outside [1,10]");
                e->score = sc;
            }
            if (r.accurate) e->rationale_accurate = *r.accurate == "true";
            if (r.source) e->source = edge_source_from_string(*r.source);
        });
    }
    return g;
}

// --- viz csv ----------------------------------------------------------------

namespace {

std::string csv_field(std::string_view v) {
    if (v.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(v);
    std::string s = "\"";
    for (char c : v) {
        if (c == '"') s += "\"\"";
        else s.push_back(c);
    }
    s += "\"";
    return s;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    std::size_t line = 1;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            any = false;
            ++line;
        } else {
            field.push_back(c);
            any = true;
        }
    }
    if (quoted) throw GraphFormatError(line, "unterminated quoted CSV field");
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

VizCsv to_viz_csv(const KnowledgeGraph& graph) {
    VizCsv out;
    out.nodes = "id,title,brand,type,is_seed\n";
    for (const auto& [id, n] : graph.products()) {
        out.nodes += csv_field(id) + "," + csv_field(n.title) + "," + csv_field(n.brand) + "," +
                     csv_field(n.product_type) + "," + (n.is_seed ? "true" : "false") + "\n";
    }
    out.edges = "subject,predicate,object,score,source\n";
    for (const auto& [key, e] : graph.edges()) {
        out.edges += csv_field(e.subject_id) + "," + csv_field(e.predicate) + "," + csv_field(e.object_id) + "," +
                     (e.score ? std::to_string(*e.score) : std::string()) + "," + std::string(to_string(e.source)) +
                     "\n";
    }
    return out;
}

KnowledgeGraph from_viz_csv(std::string_view nodes_csv, std::string_view edges_csv) {
    KnowledgeGraph g;
    const auto nodes = parse_csv(nodes_csv);
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        const auto& r = nodes[i];
        if (r.size() != 5) throw GraphFormatError(i + 1, "nodes.csv row needs 5 fields");
        ProductNode n{r[0], r[1], r[2], r[3], {}, r[4] == "true"};
        at_line(i + 1, [&] { g.upsert_product(n); });
    }
    const auto edges = parse_csv(edges_csv);
    for (std::size_t i = 1; i < edges.size(); ++i) {
        const auto& r = edges[i];
        if (r.size() != 5) throw GraphFormatError(i + 1, "edges.csv row needs 5 fields");
        at_line(i + 1, [&] {
            Edge e = make_edge(r[0], r[1], r[2], edge_source_from_string(r[4]));
            if (!r[3].empty()) e.score = std::stoi(r[3]);
            g.add_edge(e);
        });
    }
    return g;
}

// --- files --------------------------------------------------------------------

void export_graph(const KnowledgeGraph& graph, GraphFormat format, const std::filesystem::path& path) {
    switch (format) {
        case GraphFormat::JsonLines: write_file_atomic(path, to_jsonlines(graph)); return;
        case GraphFormat::NTriples: write_file_atomic(path, to_ntriples(graph)); return;
        case GraphFormat::VizCsv: {
            const auto csv = to_viz_csv(graph);
            write_file_atomic(path / "nodes.csv", csv.nodes);
            write_file_atomic(path / "edges.csv", csv.edges);
            return;
        }
    }
}

KnowledgeGraph import_graph(const std::filesystem::path& path, GraphFormat format) {
    switch (format) {
        case GraphFormat::JsonLines: return from_jsonlines(read_file(path));
        case GraphFormat::NTriples: return from_ntriples(read_file(path));
        case GraphFormat::VizCsv: return from_viz_csv(read_file(path / "nodes.csv"), read_file(path / "edges.csv"));
    }
    throw GraphError("unknown format");
}

std::string percent_encode(std::string_view s) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    out.reserve(s.size() * 3 / 2);
    for (unsigned char c : s) {
        const bool unreserved = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                                c == '-' || c == '.' || c == '_' || c == '~';
        if (unreserved) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0xf]);
        }
    }
    return out;
}

std::string percent_decode(std::string_view s) {
    auto hex = [](char h) -> int {
        if (h >= '0' && h <= '9') return h - '0';
        if (h >= 'a' && h <= 'f') return h - 'a' + 10;
        if (h >= 'A' && h <= 'F') return h - 'A' + 10;
        return -1;
    };
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size() && hex(s[i + 1]) >= 0 && hex(s[i + 2]) >= 0) {
            out.push_back(static_cast<char>(hex(s[i + 1]) * 16 + hex(s[i + 2])));
            i += 2;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

std::uint64_t graph_hash(const KnowledgeGraph& graph) { return fnv1a64(to_jsonlines(graph)); }

}  // namespace pkgforge
