#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pkgforge {

class PromptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SeedProduct {
    std::string id;
    std::string title;
};

/// The four prompt components, rendered top to bottom in this order.
/// `{seed_product}` and `{k}` are substituted in behavior_injection and
/// task_description; `{{` / `}}` there produce literal braces. The format
/// indicator and one-shot example are emitted verbatim.
struct PromptTemplate {
    std::string behavior_injection;
    std::string task_description;
    std::string format_indicator;
    std::string one_shot_example;
    /// Optional free text appended to the behavior injection.
    std::string extra_context;
};

enum class TemplateComponent { BehaviorInjection, TaskDescription, FormatIndicator, OneShotExample };

std::string_view component_name(TemplateComponent c);

struct TemplateViolation {
    TemplateComponent component;
    std::string message;
};

enum class PromptKind { Generation, Validation };

struct RenderedPrompt {
    std::string text;
    std::string seed_id;
    PromptKind kind = PromptKind::Generation;
    int k = 0;
};

/// Generation prompt shipped by default; reproduces the worked KG-generation
/// prompt used for the sneaker graph.
PromptTemplate default_generation_template();

std::vector<TemplateViolation> validate_template(const PromptTemplate& tmpl);

/// Omit drops the one-shot component, for zero-shot comparisons.
enum class OneShotMode { Include, Omit };

RenderedPrompt render_generation_prompt(const PromptTemplate& tmpl, const SeedProduct& seed, int k,
                                        OneShotMode one_shot = OneShotMode::Include);

RenderedPrompt render_validation_prompt(std::string_view seed_title, std::string_view rec_title,
                                        std::string_view rationale);

/// Section file: `[behavior_injection]`, `[task_description]`,
/// `[format_indicator]`, `[one_shot_example]`, optional `[extra_context]`.
/// Lines starting with `#` before the first section are comments.
PromptTemplate parse_template(std::string_view text);
PromptTemplate load_template(const std::filesystem::path& path);
std::string serialize_template(const PromptTemplate& tmpl);

}  // namespace pkgforge
