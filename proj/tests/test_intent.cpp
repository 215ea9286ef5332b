#include <gtest/gtest.h>

#include "agri/errors.hpp"
#include "agri/pipeline.hpp"
#include "support.hpp"

using namespace agri;
using namespace agri::pipeline;

namespace {

RuleIntentParser shipped() { return RuleIntentParser::load(fx::data_dir() / "intent_rules.json"); }

bool wants(const DataRequirement& r, Metric m) {
    return std::any_of(r.metrics.begin(), r.metrics.end(), [&](const MetricRequest& x) { return x.metric == m; });
}

class FixedBackend final : public llm::Backend {
  public:
    explicit FixedBackend(std::string reply) : reply_(std::move(reply)) {}
    std::string complete(const llm::ModelRequest& req) override {
        last = req;
        return reply_;
    }
    llm::ModelRequest last;

  private:
    std::string reply_;
};

} // namespace

TEST(Requirement, WireFormIsBitExact) {
    DataRequirement r;
    r.metrics = {{Metric::moisture, Window::last_7d}};
    r.forecast_days = 2;
    r.kb_query = "irrigation scheduling cotton";
    r.reply_language = Language::ur;
    EXPECT_EQ(r.to_json(), R"({"v":1,"metrics":[{"kind":"moisture","window":"last_7d"}],"forecast_days":2,)"
                           R"("needs_market":false,"kb_query":"irrigation scheduling cotton","reply_language":"ur"})");
    EXPECT_EQ(DataRequirement::from_json(r.to_json()), r);
    r.kb_query.reset();
    EXPECT_EQ(r.to_json().find("kb_query"), std::string::npos);
    EXPECT_EQ(DataRequirement::from_json(r.to_json()), r);
}

TEST(Requirement, StrictSchema) {
    const std::string ok = R"({"v":1,"metrics":[],"forecast_days":3,"needs_market":false,"reply_language":"en"})";
    EXPECT_NO_THROW((void)DataRequirement::from_json(ok));
    for (const auto* bad : {
             "not json",
             "[]",
             R"({"v":2,"metrics":[],"forecast_days":3,"needs_market":false,"reply_language":"en"})",
             R"({"v":1,"metrics":[],"forecast_days":3,"needs_market":false,"reply_language":"en","x":1})",
             R"({"v":1,"metrics":[],"forecast_days":3,"reply_language":"en"})",
             R"({"v":1,"metrics":[],"forecast_days":"3","needs_market":false,"reply_language":"en"})",
             R"({"v":1,"metrics":[],"forecast_days":15,"needs_market":false,"reply_language":"en"})",
             R"({"v":1,"metrics":[],"forecast_days":0,"needs_market":false,"reply_language":"en"})",
             R"({"v":1,"metrics":[{"kind":"sugar","window":"latest"}],"forecast_days":0,"needs_market":false,"reply_language":"en"})",
             R"({"v":1,"metrics":[{"kind":"ph","window":"forever"}],"forecast_days":0,"needs_market":false,"reply_language":"en"})",
             R"({"v":1,"metrics":[{"kind":"ph"}],"forecast_days":0,"needs_market":false,"reply_language":"en"})",
             R"({"v":1,"metrics":[],"forecast_days":3,"needs_market":false,"reply_language":"hi"})",
         }) {
        EXPECT_THROW((void)DataRequirement::from_json(bad), SchemaError) << bad;
    }
}

TEST(RuleParser, PhDoesNotMatchPhosphorus) {
    auto p = shipped();
    const auto r = p.parse("How much phosphorus should I add?");
    EXPECT_TRUE(wants(r, Metric::phosphorus));
    EXPECT_FALSE(wants(r, Metric::ph));
    const auto acid = p.parse("Is my soil ph too low?");
    EXPECT_TRUE(wants(acid, Metric::ph));
}

TEST(RuleParser, UnionsRulesAndWidensWindows) {
    auto p = shipped();
    const auto r = p.parse("The field looks dry, should I irrigate before the rain?");
    ASSERT_TRUE(wants(r, Metric::moisture));
    EXPECT_EQ(r.metrics.front().window, Window::last_7d);
    EXPECT_EQ(r.forecast_days, 5);
    ASSERT_TRUE(r.kb_query);
    EXPECT_NE(r.kb_query->find("irrigation"), std::string::npos);
}

TEST(RuleParser, UnmatchedBecomesKnowledgeQuery) {
    auto p = shipped();
    const auto r = p.parse("Tell me about zinc deficiency symptoms");
    EXPECT_TRUE(r.metrics.empty());
    ASSERT_TRUE(r.kb_query);
    EXPECT_NE(r.kb_query->find("zinc"), std::string::npos);
    EXPECT_THROW((void)p.parse("   "), UnparseableIntent);
}

TEST(RuleParser, TableErrors) {
    EXPECT_THROW((void)RuleIntentParser::parse_table(R"({"version":1,"rules":[{"keywords":[]}]})"), ConfigError);
    EXPECT_THROW((void)RuleIntentParser::parse_table(R"({"version":3,"rules":[]})"), ConfigError);
    EXPECT_THROW((void)RuleIntentParser::parse_table(
                     R"({"version":1,"rules":[{"keywords":["a"],"metrics":[{"kind":"ph","window":"year"}]}]})"),
                 ConfigError);
}

TEST(LlmParser, AcceptsValidDocumentInsideProse) {
    auto rules = shipped();
    const auto templates = llm::TemplateSet::load(fx::data_dir() / "prompts");
    FixedBackend backend(
        R"(Sure: {"v":1,"metrics":[{"kind":"ec","window":"latest"}],"forecast_days":0,"needs_market":false,"reply_language":"sd"})");
    LlmIntentParser p(backend, templates, rules);
    const auto r = p.parse("Is the water salty?");
    EXPECT_EQ(r.metrics, (std::vector<MetricRequest>{{Metric::ec, Window::latest}}));
    EXPECT_EQ(r.reply_language, Language::sd);
    EXPECT_EQ(p.fallbacks(), 0u);
    EXPECT_EQ(backend.last.stage, llm::Stage::intent);
    EXPECT_NE(backend.last.user_payload.find("Is the water salty?"), std::string::npos);
}

TEST(LlmParser, FallsBackOnInvalidOutput) {
    auto rules = shipped();
    const auto templates = llm::TemplateSet::load(fx::data_dir() / "prompts");
    for (const auto* reply : {"I cannot help", R"({"v":1,"metrics":"moisture"})", "{"}) {
        FixedBackend backend(reply);
        LlmIntentParser p(backend, templates, rules);
        const auto r = p.parse("Should I irrigate?");
        EXPECT_TRUE(wants(r, Metric::moisture));
        EXPECT_EQ(p.fallbacks(), 1u);
    }
}
