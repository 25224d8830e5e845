#include <doctest.h>

#include <string>

#include "pkgforge/prompt.h"

using namespace pkgforge;

namespace {

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        if (hay.compare(i, needle.size(), needle) == 0) ++n;
    }
    return n;
}

const SeedProduct kUnc{"s1", "Jordan 1 Retro OG High UNC Toe University Blue"};

}  // namespace

TEST_CASE("default template renders the worked generation prompt") {
    const auto p = render_generation_prompt(default_generation_template(), kUnc, 5);
    CHECK(p.text.starts_with(
        "One user of eBay is browsing a product titled 'Jordan 1 Retro OG High UNC Toe University Blue'"));
    CHECK(p.text.find("Provide 5 recommendations") != std::string::npos);
    CHECK(p.text.find("where predicate is the recommendation rationale from Subject to Object") != std::string::npos);
    CHECK(p.kind == PromptKind::Generation);
    CHECK(p.seed_id == "s1");
    CHECK(p.k == 5);
}

TEST_CASE("components join with blank lines in fixed order") {
    PromptTemplate t{"B {seed_product}", "T {k}", "F", "O", ""};
    CHECK(render_generation_prompt(t, {"x", "A"}, 3).text == "B A\n\nT 3\n\nF\n\nO");
    t.extra_context = "ctx";
    CHECK(render_generation_prompt(t, {"x", "A"}, 3).text == "B A ctx\n\nT 3\n\nF\n\nO");
}

TEST_CASE("direct substitution") {
    PromptTemplate t = default_generation_template();
    t.behavior_injection = "X {seed_product} Y";
    CHECK(render_generation_prompt(t, {"id", "A"}, 1).text.find("X A Y") != std::string::npos);
}

TEST_CASE("doubled braces are literal") {
    PromptTemplate t = default_generation_template();
    t.behavior_injection = "{{literal}} {seed_product}";
    const auto text = render_generation_prompt(t, {"id", "A"}, 1).text;
    CHECK(text.starts_with("{literal} A"));
}

TEST_CASE("one-shot example appears exactly once and its removal shortens the prompt") {
    const auto t = default_generation_template();
    for (int k : {1, 5, 12}) {
        const auto text = render_generation_prompt(t, kUnc, k).text;
        CHECK(count_occurrences(text, t.one_shot_example) == 1);
        CHECK(text.find("{seed_product}") == std::string::npos);
        CHECK(text.find("{k}") == std::string::npos);
    }
    const auto full = render_generation_prompt(t, kUnc, 5).text;
    const auto zero_shot = render_generation_prompt(t, kUnc, 5, OneShotMode::Omit).text;
    CHECK(zero_shot.size() < full.size());
    CHECK(zero_shot.find(t.one_shot_example) == std::string::npos);
    CHECK(full.starts_with(zero_shot));
}

TEST_CASE("rendering is pure") {
    const auto t = default_generation_template();
    CHECK(render_generation_prompt(t, kUnc, 5).text == render_generation_prompt(t, kUnc, 5).text);
}

TEST_CASE("render errors") {
    const auto t = default_generation_template();
    CHECK_THROWS_AS(render_generation_prompt(t, {"id", "  "}, 5), PromptError);
    CHECK_THROWS_AS(render_generation_prompt(t, kUnc, 0), PromptError);
    auto bad = t;
    bad.task_description = "Provide some recommendations.";
    CHECK_THROWS_AS(render_generation_prompt(bad, kUnc, 5), PromptError);
    bad = t;
    bad.behavior_injection = "{unknown} {seed_product}";
    CHECK_THROWS_AS(render_generation_prompt(bad, kUnc, 5), PromptError);
}

TEST_CASE("validate_template") {
    CHECK(validate_template(default_generation_template()).empty());
    auto t = default_generation_template();
    t.one_shot_example = "";
    auto v = validate_template(t);
    REQUIRE(v.size() == 1);
    CHECK(v[0].component == TemplateComponent::OneShotExample);
    t = default_generation_template();
    t.task_description = "Provide recommendations.";
    v = validate_template(t);
    REQUIRE(v.size() == 1);
    CHECK(v[0].component == TemplateComponent::TaskDescription);
    CHECK(v[0].message.find("{k}") != std::string::npos);
}

TEST_CASE("validation prompt") {
    const auto p = render_validation_prompt(kUnc.title, "Air Jordan 1 Retro High OG 'Chicago'",
                                            "Classic colorway appeal");
    CHECK(p.kind == PromptKind::Validation);
    CHECK(p.text.ends_with("Now you are viewing 'Jordan 1 Retro OG High UNC Toe University Blue'. The recommended "
                           "item is 'Air Jordan 1 Retro High OG 'Chicago'', and the recommendation reason is "
                           "'Classic colorway appeal'."));
    CHECK(p.text.find("\"original\": \"Same series\"") != std::string::npos);
    CHECK(p.text.find("\"original\": \"Same colorway\"") != std::string::npos);
    CHECK(p.text.find("1 to 10") != std::string::npos);

    const auto small = render_validation_prompt("A", "B", "similar style");
    CHECK(small.text.find("'A'") != std::string::npos);
    CHECK(small.text.find("'B'") != std::string::npos);
    CHECK(small.text.find("similar style") != std::string::npos);
    CHECK_THROWS_AS(render_validation_prompt("", "B", "r"), PromptError);
    CHECK_THROWS_AS(render_validation_prompt("A", "B", " "), PromptError);
}

TEST_CASE("template file round trip") {
    const auto t = default_generation_template();
    const auto text = serialize_template(t);
    const auto back = parse_template(text);
    CHECK(back.behavior_injection == t.behavior_injection);
    CHECK(back.task_description == t.task_description);
    CHECK(back.format_indicator == t.format_indicator);
    CHECK(back.one_shot_example == t.one_shot_example);
    CHECK(back.extra_context == t.extra_context);

    const auto parsed = parse_template("# comment\n[behavior_injection]\nHi {seed_product}\n[task_description]\n"
                                       "Give {k}\n[format_indicator]\nJSON\n[one_shot_example]\n[\"\", \"\"]\n");
    CHECK(parsed.behavior_injection == "Hi {seed_product}");
    CHECK(parsed.one_shot_example == "[\"\", \"\"]");
    CHECK_THROWS_AS(parse_template("stray text\n[behavior_injection]\nx"), PromptError);
}
