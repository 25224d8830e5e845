#include "pkgforge/prompt.h"

#include <cctype>
#include <map>

#include "pkgforge/util.h"

namespace pkgforge {

namespace {

constexpr std::string_view kSeedPlaceholder = "{seed_product}";
constexpr std::string_view kKPlaceholder = "{k}";

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

std::string substitute(std::string_view text, const std::map<std::string, std::string, std::less<>>& values) {
    std::string out;
    out.reserve(text.size() + 64);
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
            out.push_back('{');
            ++i;
            continue;
        }
        if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
            out.push_back('}');
            ++i;
            continue;
        }
        if (c == '{') {
            std::size_t j = i + 1;
            while (j < text.size() && is_ident_char(text[j])) ++j;
            if (j > i + 1 && j < text.size() && text[j] == '}') {
                const auto name = text.substr(i + 1, j - i - 1);
                auto it = values.find(name);
                if (it == values.end()) {
                    throw PromptError("unknown placeholder {" + std::string(name) + "}");
                }
                out += it->second;
                i = j;
                continue;
            }
        }
        out.push_back(c);
    }
    return out;
}

constexpr std::string_view kValidationInstructions =
    "As an e-commerce user browsing a sneaker, you've received recommendations with accompanying "
    "reasons. Your task is to assign a score from 1 to 10 indicating the acceptability of each "
    "recommended item. Additionally, evaluate the accuracy and appropriateness of the provided "
    "reasons. If needed, suggest better reasons. Please format all output in JSON format.\n"
    "\n"
    "Here are two examples of input and output :\n"
    "\n"
    "Input: You are browsing 'Jordan Dub Zero Mid White Cool Grey'. The recommended item is "
    "'Jordan Dub Zero Mid Black White', and the reason is 'Same series'.\n"
    "\n"
    "Output: { \n"
    "    \"Jordan Dub Zero Mid Black White\": {\n"
    "        \"acceptability_score\": 9,\n"
    "        \"reason\": {\n"
    "            \"original\": \"Same series\",\n"
    "            \"accurate\": True,\n"
    "            \"alternative\": None\n"
    "        }\n"
    "    }}\n"
    "\n"
    "Input: You are browsing 'Jordan Dub Zero Mid White Cool Grey'. The recommended item is "
    "'Jordan Dub Zero Mid Black White', and the reason is 'Same colorway'.\n"
    "\n"
    "Output: { \n"
    "    \"Jordan Dub Zero Mid Black White\": {\n"
    "        \"acceptability_score\": 9,\n"
    "        \"reason\": {\n"
    "            \"original\": \"Same colorway\",\n"
    "            \"accurate\": False,\n"
    "            \"alternative\": \"different colorway\"\n"
    "        }\n"
    "    }}\n"
    "\n";

const std::map<std::string, TemplateComponent, std::less<>>& section_names() {
    static const std::map<std::string, TemplateComponent, std::less<>> names = {
        {"behavior_injection", TemplateComponent::BehaviorInjection},
        {"task_description", TemplateComponent::TaskDescription},
        {"format_indicator", TemplateComponent::FormatIndicator},
        {"one_shot_example", TemplateComponent::OneShotExample},
    };
    return names;
}

std::string& component_field(PromptTemplate& t, TemplateComponent c) {
    switch (c) {
        case TemplateComponent::BehaviorInjection: return t.behavior_injection;
        case TemplateComponent::TaskDescription: return t.task_description;
        case TemplateComponent::FormatIndicator: return t.format_indicator;
        case TemplateComponent::OneShotExample: return t.one_shot_example;
    }
    return t.one_shot_example;
}

// Strips leading and trailing blank lines but keeps interior layout.
std::string strip_blank_lines(std::string_view body) {
    std::size_t b = 0;
    std::size_t e = body.size();
    while (b < e && (body[b] == '\n' || body[b] == '\r')) ++b;
    while (e > b && (body[e - 1] == '\n' || body[e - 1] == '\r' || body[e - 1] == ' ' || body[e - 1] == '\t')) --e;
    return std::string(body.substr(b, e - b));
}

}  // namespace

std::string_view component_name(TemplateComponent c) {
    switch (c) {
        case TemplateComponent::BehaviorInjection: return "behavior_injection";
        case TemplateComponent::TaskDescription: return "task_description";
        case TemplateComponent::FormatIndicator: return "format_indicator";
        case TemplateComponent::OneShotExample: return "one_shot_example";
    }
    return "unknown";
}

PromptTemplate default_generation_template() {
    PromptTemplate t;
    t.behavior_injection =
        "One user of eBay is browsing a product titled '{seed_product}', hereinafter we refer to it as "
        "the seed product.";
    t.task_description =
        "Provide {k} recommendations that the user might be interested in related to the seed product. "
        "For each recommendation, offer a reasonable rationale in 5 words, then predict the brand, type, "
        "and target audience demographics of each product.";
    t.format_indicator =
        "Organize the answer to knowledge graph in JSON format. Nodes should be products extracted from "
        "the seed product and recommendations. Edges should be (Subject, Predicate, Object) triplets, "
        "where predicate is the recommendation rationale from Subject to Object.";
    t.one_shot_example =
        "An example of output format is as below:\n"
        "{\"nodes\":[{\"product_title\", seed_product, \"brand\": \"\", type: \"\", audience: [\"\", \"\", "
        "\"\"]}, {\"product_title\": recommendation1}, ...], \n"
        "\"edges\": [{\"subject\":\n"
        "seed_product, \"predicate\", \"\", \"object\": recommendation1}, ...]}";
    return t;
}

std::vector<TemplateViolation> validate_template(const PromptTemplate& tmpl) {
    std::vector<TemplateViolation> out;
    auto check_nonempty = [&](TemplateComponent c, const std::string& text) {
        if (trim(text).empty()) {
            out.push_back({c, std::string(component_name(c)) + " is empty"});
        }
    };
    check_nonempty(TemplateComponent::BehaviorInjection, tmpl.behavior_injection);
    check_nonempty(TemplateComponent::TaskDescription, tmpl.task_description);
    check_nonempty(TemplateComponent::FormatIndicator, tmpl.format_indicator);
    check_nonempty(TemplateComponent::OneShotExample, tmpl.one_shot_example);
    if (tmpl.behavior_injection.find(kSeedPlaceholder) == std::string::npos) {
        out.push_back({TemplateComponent::BehaviorInjection, "missing placeholder {seed_product}"});
    }
    if (tmpl.task_description.find(kKPlaceholder) == std::string::npos) {
        out.push_back({TemplateComponent::TaskDescription, "missing placeholder {k}"});
    }
    return out;
}

RenderedPrompt render_generation_prompt(const PromptTemplate& tmpl, const SeedProduct& seed, int k,
                                        OneShotMode one_shot) {
    if (auto violations = validate_template(tmpl); !violations.empty()) {
        std::string msg = "invalid template:";
        for (const auto& v : violations) msg += " " + v.message + ";";
        throw PromptError(msg);
    }
    if (trim(seed.title).empty()) throw PromptError("seed '" + seed.id + "' has an empty title");
    if (k < 1) throw PromptError("k must be >= 1");

    const std::map<std::string, std::string, std::less<>> values = {
        {"seed_product", seed.title},
        {"k", std::to_string(k)},
    };
    std::string behavior = substitute(tmpl.behavior_injection, values);
    if (!trim(tmpl.extra_context).empty()) behavior += " " + trim(tmpl.extra_context);

    RenderedPrompt out;
    out.kind = PromptKind::Generation;
    out.seed_id = seed.id;
    out.k = k;
    out.text = behavior + "\n\n" + substitute(tmpl.task_description, values) + "\n\n" + tmpl.format_indicator;
    if (one_shot == OneShotMode::Include) out.text += "\n\n" + tmpl.one_shot_example;
    if (out.text.find(kSeedPlaceholder) != std::string::npos || out.text.find(kKPlaceholder) != std::string::npos) {
        throw PromptError("rendered prompt for seed '" + seed.id + "' still contains a placeholder");
    }
    return out;
}

RenderedPrompt render_validation_prompt(std::string_view seed_title, std::string_view rec_title,
                                        std::string_view rationale) {
    if (trim(seed_title).empty() || trim(rec_title).empty() || trim(rationale).empty()) {
        throw PromptError("validation prompt needs a seed title, a recommended title and a rationale");
    }
    RenderedPrompt out;
    out.kind = PromptKind::Validation;
    out.text.reserve(kValidationInstructions.size() + 256);
    out.text += kValidationInstructions;
    out.text += "Now you are viewing '";
    out.text += seed_title;
    out.text += "'. The recommended item is '";
    out.text += rec_title;
    out.text += "', and the recommendation reason is '";
    out.text += rationale;
    out.text += "'.";
    return out;
}

PromptTemplate parse_template(std::string_view text) {
    PromptTemplate t;
    std::string* current = nullptr;
    std::map<std::string, std::string, std::less<>> bodies;
    std::string current_name;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        ++line_no;
        pos = nl + 1;
        auto trimmed = trim(line);
        const bool header = trimmed.size() > 2 && trimmed.front() == '[' && trimmed.back() == ']' &&
                            (trimmed == "[extra_context]" ||
                             section_names().contains(std::string_view(trimmed).substr(1, trimmed.size() - 2)));
        if (header) {
            current_name = trimmed.substr(1, trimmed.size() - 2);
            if (bodies.contains(current_name)) {
                throw PromptError("template line " + std::to_string(line_no) + ": duplicate section [" +
                                  current_name + "]");
            }
            current = &bodies[current_name];
            continue;
        }
        if (current == nullptr) {
            if (trimmed.empty() || trimmed.front() == '#') continue;
            throw PromptError("template line " + std::to_string(line_no) + ": text outside a section");
        }
        current->append(line);
        current->push_back('\n');
        if (nl == text.size()) break;
    }
    for (const auto& [name, body] : bodies) {
        if (name == "extra_context") {
            t.extra_context = strip_blank_lines(body);
        } else {
            component_field(t, section_names().find(name)->second) = strip_blank_lines(body);
        }
    }
    return t;
}

PromptTemplate load_template(const std::filesystem::path& path) {
    return parse_template(read_file(path));
}

std::string serialize_template(const PromptTemplate& tmpl) {
    std::string out;
    auto section = [&](std::string_view name, const std::string& body) {
        out += "[";
        out += name;
        out += "]\n";
        out += body;
        out += "\n\n";
    };
    section("behavior_injection", tmpl.behavior_injection);
    section("task_description", tmpl.task_description);
    section("format_indicator", tmpl.format_indicator);
    section("one_shot_example", tmpl.one_shot_example);
    if (!tmpl.extra_context.empty()) section("extra_context", tmpl.extra_context);
    return out;
}

}  // namespace pkgforge
