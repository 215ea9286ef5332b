#include <atomic>
#include <random>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "agri/errors.hpp"
#include "agri/llm.hpp"
#include "agri/prompt.hpp"
#include "agri/script.hpp"
#include "agri/text.hpp"
#include "support.hpp"

using namespace agri;
using namespace agri::llm;

namespace {

const char* kRules = R"({"version": 1, "rules": [
  {"stage": "synthesis", "block": "question", "match": ["lime"], "response": "Lime it. {{facts}}"},
  {"stage": "synthesis", "match": ["<facts>"], "response": "{{facts}} {{passages}} {{gaps}}"},
  {"stage": "intent", "match": "", "response": "{{question}}"}
]})";

ModelRequest request(Stage stage, std::string payload) {
    ModelRequest r;
    r.stage = stage;
    r.user_payload = std::move(payload);
    return r;
}

const std::string kPayload =
    "<question>Should I lime?</question>\n<facts>\n- Latest soil pH is 4.5. [R:n1#3]\n- Second fact. [R:n1#4]\n</facts>\n"
    "<passages>\n[P:acid#1] (Soil acidity §Liming ¶1) Lime raises pH on acid soil. More.\n</passages>\n"
    "<gaps>\n- The forecast is unavailable.\n</gaps>";

class SlowBackend final : public Backend {
  public:
    std::string complete(const ModelRequest&) override {
        const int now = ++active;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        --active;
        return "ok";
    }
    std::atomic<int> active{0};
    std::atomic<int> peak{0};
};

} // namespace

TEST(Mock, FirstMatchingRuleWins) {
    auto mock = MockBackend::parse(kRules);
    EXPECT_EQ(mock.complete(request(Stage::synthesis, kPayload)),
              "Lime it. Latest soil pH is 4.5. [R:n1#3] Second fact. [R:n1#4]");
}

TEST(Mock, BlockScopedMatchIgnoresRestOfPayload) {
    auto mock = MockBackend::parse(kRules);
    auto payload = kPayload;
    payload.replace(payload.find("Should I lime?"), 14, "Is it dry?");
    // "lime" still occurs in the passages, but the rule only looks at the question.
    EXPECT_EQ(mock.complete(request(Stage::synthesis, payload)),
              "Latest soil pH is 4.5. [R:n1#3] Second fact. [R:n1#4] Lime raises pH on acid soil. [P:acid#1] The "
              "forecast is unavailable.");
}

TEST(Mock, QuestionDirectiveAndEmptyMatch) {
    auto mock = MockBackend::parse(kRules);
    EXPECT_EQ(mock.complete(request(Stage::intent, "<question> hi  there </question>")), "hi there");
}

TEST(Mock, NoRuleIsBackendError) {
    auto mock = MockBackend::parse(kRules);
    try {
        (void)mock.complete(request(Stage::judge, "x"));
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.status(), 404);
    }
}

TEST(Mock, ReferentiallyTransparent) {
    auto a = MockBackend::load(fx::data_dir() / "mock" / "rules.json");
    auto b = MockBackend::load(fx::data_dir() / "mock" / "rules.json");
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(a.complete(request(Stage::synthesis, kPayload)), b.complete(request(Stage::synthesis, kPayload)));
    }
}

TEST(Mock, RuleTableErrors) {
    EXPECT_THROW((void)MockBackend::parse("{}"), ConfigError);
    EXPECT_THROW((void)MockBackend::parse(R"({"version": 1, "rules": [{"stage": "dream", "response": ""}]})"),
                 ConfigError);
}

TEST(ExtractBlock, Basics) {
    EXPECT_EQ(extract_block("<a>x</a><b>y</b>", "b"), "y");
    EXPECT_EQ(extract_block("<a>x", "a"), "");
    EXPECT_EQ(extract_block("", "a"), "");
}

TEST(Bounded, CapsConcurrency) {
    SlowBackend slow;
    BoundedBackend bounded(slow, 3);
    std::vector<std::thread> ts;
    for (int i = 0; i < 12; ++i) {
        ts.emplace_back([&] { (void)bounded.complete({}); });
    }
    for (auto& t : ts) {
        t.join();
    }
    EXPECT_LE(slow.peak.load(), 3);
    EXPECT_GE(slow.peak.load(), 1);
}

TEST(Translator, RoundTripsAndTagsTarget) {
    MockTranslator tr;
    const std::string en = "Latest soil moisture is 30%. Irrigate soon!";
    for (auto lang : {Language::ur, Language::pa, Language::sd}) {
        const auto out = tr.translate(en, Language::en, lang);
        EXPECT_TRUE(text::starts_with(out, "⟪" + std::string(language_code(lang)) + "⟫"));
        EXPECT_TRUE(validate_script(out, lang).valid);
        EXPECT_NE(out.find("30%"), std::string::npos);
        EXPECT_EQ(tr.translate(out, lang, Language::en), en);
    }
    EXPECT_EQ(tr.translate(en, Language::en, Language::en), en);
    EXPECT_EQ(tr.translate("untagged", Language::ur, Language::en), "untagged");
}

TEST(TranslatorProperty, RandomAsciiRoundTrips) {
    MockTranslator tr;
    std::mt19937 rng(8);
    std::uniform_int_distribution<int> ch(32, 126);
    for (int i = 0; i < 200; ++i) {
        std::string s(static_cast<std::size_t>(i % 40 + 1), ' ');
        for (auto& c : s) {
            c = static_cast<char>(ch(rng));
        }
        EXPECT_EQ(tr.translate(tr.translate(s, Language::en, Language::pa), Language::pa, Language::en), s);
    }
}

TEST(Script, GurmukhiRejectedUnderPunjabi) {
    const auto check = validate_script("ਮਿੱਟੀ ਵਿੱਚ ਨਮੀ ਘੱਟ ਹੈ", Language::pa);
    EXPECT_FALSE(check.valid);
    EXPECT_EQ(check.detected, ScriptBlock::gurmukhi);
    EXPECT_GT(check.letters, 0u);
}

TEST(Script, ArabicScriptPasses) {
    EXPECT_TRUE(validate_script("مٹی میں نمی کم ہے۔ ۳۰ فیصد", Language::ur).valid);
    EXPECT_TRUE(validate_script("مٹی وچ نمی گھٹ اے", Language::pa).valid);
    EXPECT_TRUE(validate_script("مٽيءَ ۾ نمي گهٽ آهي", Language::sd).valid);
    EXPECT_FALSE(validate_script("Soil moisture is low", Language::ur).valid);
    EXPECT_FALSE(validate_script("मिट्टी में नमी कम है", Language::ur).valid);
}

TEST(Script, ThresholdAndEdgeCases) {
    // 9 Arabic letters and 1 Latin letter: exactly 90%.
    EXPECT_TRUE(validate_script("ابتثجحخدذ x", Language::ur).valid);
    EXPECT_FALSE(validate_script("ابتثجحخد xy", Language::ur).valid);
    EXPECT_TRUE(validate_script("30% 4.5 !!", Language::pa).valid);
    EXPECT_TRUE(validate_script("", Language::pa).valid);
    EXPECT_TRUE(validate_script("Soil is fine", Language::en).valid);
    EXPECT_FALSE(validate_script("ਮਿੱਟੀ", Language::en).valid);
    // The pseudo-translation tag is not counted.
    EXPECT_TRUE(validate_script("⟪pa⟫ابت", Language::pa).valid);
}

TEST(Languages, Supported) {
    EXPECT_EQ(language_tag("ur"), Language::ur);
    EXPECT_THROW((void)language_tag("hi"), UnsupportedLanguage);
    EXPECT_TRUE(uses_arabic_script(Language::sd));
    EXPECT_FALSE(uses_arabic_script(Language::en));
}

TEST(Prompt, RenderPlaceholdersAndSections) {
    const TemplateVars vars{{"name", "cotton"}, {"empty", ""}};
    EXPECT_EQ(render_template("crop {{name}}{{#empty}} hidden{{/empty}}{{^empty}} shown{{/empty}}", vars),
              "crop cotton shown");
    EXPECT_EQ(render_template("{{#name}}[{{name}}]{{/name}}", vars), "[cotton]");
    try {
        (void)render_template("{{missing}}", vars, "synthesis");
        FAIL();
    } catch (const TemplateError& e) {
        EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);
    }
}

TEST(Prompt, ShippedTemplatesLoadAndPersonaPrepended) {
    const auto set = TemplateSet::load(fx::data_dir() / "prompts");
    EXPECT_FALSE(set.persona().empty());
    TemplateVars vars{{"question", "q"}, {"facts", "f"},   {"passages", "p"}, {"gaps", ""},
                      {"history", ""},   {"crop", "maize"}, {"crops", "maize"}, {"stage", "vegetative"},
                      {"date", "2025-06-10"}};
    const auto synth = set.render(Stage::synthesis, vars);
    EXPECT_EQ(synth.stage, Stage::synthesis);
    EXPECT_TRUE(text::starts_with(synth.system_prompt, set.persona()));
    EXPECT_NE(synth.user_payload.find("<question>"), std::string::npos);
    EXPECT_EQ(synth.user_payload.find("<gaps>"), std::string::npos);
    EXPECT_TRUE(uses_persona(Stage::summary));
    EXPECT_FALSE(uses_persona(Stage::intent));
    const auto intent = set.render(Stage::intent, {{"message", "hello"}});
    EXPECT_FALSE(text::starts_with(intent.system_prompt, set.persona()));
    EXPECT_THROW((void)set.render(Stage::synthesis, {{"question", "q"}}), TemplateError);
}

TEST(Prompt, StageTemplateHeader) {
    const auto t = TemplateSet::parse_stage_template("# template: judge\n# version: 3\n[system]\nS\n[user]\nU {{x}}\n",
                                                     "judge");
    EXPECT_EQ(t.version, 3);
    EXPECT_EQ(t.system, "S");
    EXPECT_EQ(t.user, "U {{x}}");
}

TEST(Remote, ChatCompletionsRoundTrip) {
    httplib::Server srv;
    nlohmann::json seen;
    std::atomic<int> status{200};
    srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        res.status = status.load();
        res.set_content(R"({"choices": [{"message": {"content": "hello"}}]})", "application/json");
    });
    const int port = srv.bind_to_any_port("127.0.0.1");
    std::thread t([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();

    RemoteBackend remote({"http://127.0.0.1:" + std::to_string(port), "test-model", "", 5.0});
    ModelRequest req;
    req.system_prompt = "sys";
    req.user_payload = "user";
    EXPECT_EQ(remote.complete(req), "hello");
    EXPECT_EQ(seen["model"], "test-model");
    EXPECT_EQ(seen["messages"][0]["content"], "sys");
    EXPECT_EQ(seen["messages"][1]["role"], "user");

    status = 503;
    try {
        (void)remote.complete(req);
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.status(), 503);
    }
    srv.stop();
    t.join();

    RemoteBackend dead({"http://127.0.0.1:1", "m", "", 0.5});
    EXPECT_THROW((void)dead.complete(req), RetryableError);
}
