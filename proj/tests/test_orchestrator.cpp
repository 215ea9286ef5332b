#include <sstream>

#include <gtest/gtest.h>

#include "agri/errors.hpp"
#include "agri/orchestrator.hpp"
#include "agri/script.hpp"
#include "support.hpp"

using namespace agri;
using namespace agri::pipeline;

namespace {

constexpr Timestamp kNow = 1'749'600'000;

class DownBackend final : public llm::Backend {
  public:
    std::string complete(const llm::ModelRequest&) override {
        ++calls;
        throw BackendError(503, "overloaded");
    }
    int calls = 0;
};

struct Rig {
    store::Store store;
    llm::MockBackend mock = llm::MockBackend::load(fx::data_dir() / "mock" / "rules.json");
    llm::MockTranslator translator;
    llm::TemplateSet templates = llm::TemplateSet::load(fx::data_dir() / "prompts");
    RuleIntentParser intent = RuleIntentParser::load(fx::data_dir() / "intent_rules.json");
    std::unique_ptr<kb::KnowledgeBase> kb = std::make_unique<kb::KnowledgeBase>();
    feeds::ReplayProvider feeds{fx::data_dir() / "feeds"};
    VirtualTimeSource time;
    StageLog log;
    FarmProfile farm;

    Rig() {
        kb->ingest_all(kb::load_corpus(fx::data_dir() / "kb" / "corpus"));
        FarmProfile p;
        p.phone = "+923001110001";
        p.language = Language::ur;
        p.crops = {"cotton"};
        p.location = {30.2, 71.5};
        p.summary_times = {"07:00"};
        p.utc_offset_minutes = 300;
        p.active = true;
        farm = store.add_farm(p);
        store.attach_node("cotton-1", farm.farm_id);
        for (int i = 0; i < 7 * 24; ++i) {
            auto r = fx::reading("cotton-1", static_cast<std::uint64_t>(i + 1),
                                      kNow - 7 * kSecondsPerDay + i * 3600);
            r.set(Metric::moisture, 44.0 - 3.0 * i / 24.0);
            store.append_reading(farm.farm_id, r);
        }
    }

    OrchestratorDeps deps(llm::Backend& backend) {
        return {store, &feeds, kb.get(), backend, translator, templates, intent, time, {}, &log, 4};
    }

    std::string ask(const std::string& en) { return translator.translate(en, Language::en, farm.language); }
};

} // namespace

TEST(Handle, AnswersInFarmLanguageWithResolvableCitations) {
    Rig rig;
    Orchestrator orch(rig.deps(rig.mock));
    const auto reply = orch.handle(rig.farm, rig.ask("Should I irrigate my cotton today?"), kNow);
    EXPECT_FALSE(reply.status);
    EXPECT_FALSE(reply.fallback);
    EXPECT_EQ(reply.language, Language::ur);
    EXPECT_TRUE(llm::validate_script(reply.text, Language::ur).valid);
    EXPECT_TRUE(reply.consumed_sensor);
    EXPECT_TRUE(reply.grounded);
    ASSERT_FALSE(reply.citations.empty());
    const auto fc = rig.feeds.get_forecast(rig.farm.location, 2);
    for (const auto& c : reply.citations) {
        EXPECT_TRUE(citation_resolves(c, rig.store, rig.farm.farm_id, rig.kb.get(), fc)) << c.marker();
    }
    const auto history = rig.store.chat_history(rig.farm.farm_id);
    ASSERT_EQ(history.size(), 2u);
    EXPECT_EQ(history[0].direction, Direction::inbound);
    EXPECT_EQ(history[1].body, reply.text);
    EXPECT_EQ(history[1].citations, reply.citations);
}

TEST(Handle, StageLogCoversEveryStage) {
    Rig rig;
    std::ostringstream sink;
    StageLog log(&sink);
    auto deps = rig.deps(rig.mock);
    deps.log = &log;
    deps.feeds = nullptr;
    Orchestrator orch(deps);
    (void)orch.handle(rig.farm, rig.ask("Should I irrigate?"), kNow);
    const auto records = log.records();
    std::vector<std::string> stages;
    for (const auto& r : records) {
        stages.push_back(r.stage);
        EXPECT_EQ(r.farm_id, rig.farm.farm_id);
        EXPECT_GE(r.ms, 0.0);
    }
    EXPECT_EQ(stages, (std::vector<std::string>{"translate_in", "parse_intent", "enrich", "synthesize", "translate_out"}));
    // The forecast was requested but no feed is configured.
    EXPECT_EQ(records[2].outcome, "degraded");
    EXPECT_EQ(records[3].outcome, "ok");
    std::istringstream lines(sink.str());
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_TRUE(j.contains("ms"));
        EXPECT_TRUE(j.contains("attempts"));
        ++n;
    }
    EXPECT_EQ(n, 5);
}

TEST(Handle, UnparseableQuestionAsksForClarification) {
    Rig rig;
    Orchestrator orch(rig.deps(rig.mock));
    const auto reply = orch.handle(rig.farm, "??", kNow);
    EXPECT_TRUE(reply.status);
    EXPECT_EQ(reply.text, status_message(StatusKind::clarify, Language::ur));
}

TEST(Handle, ExhaustedBackendYieldsStatusMessage) {
    Rig rig;
    DownBackend down;
    auto deps = rig.deps(down);
    deps.retry = {2, 1.0, 2.0, 60.0};
    Orchestrator orch(deps);
    const auto reply = orch.handle(rig.farm, rig.ask("Should I irrigate?"), kNow);
    EXPECT_TRUE(reply.status);
    EXPECT_EQ(reply.text, status_message(StatusKind::unavailable, Language::ur));
    EXPECT_EQ(down.calls, 3);
    EXPECT_DOUBLE_EQ(rig.time.now(), 3.0);
    const auto records = rig.log.records();
    ASSERT_FALSE(records.empty());
    EXPECT_EQ(records.back().stage, "synthesize");
    EXPECT_EQ(records.back().outcome, "failed");
    EXPECT_EQ(records.back().attempts, 3);
    // The status reply is still logged as outbound.
    EXPECT_EQ(rig.store.chat_history(rig.farm.farm_id).back().body, reply.text);
}

TEST(Summary, ReportsAggregatesAndTrend) {
    Rig rig;
    Orchestrator orch(rig.deps(rig.mock));
    const auto reply = orch.daily_summary(rig.farm, kNow);
    EXPECT_FALSE(reply.status);
    EXPECT_TRUE(llm::validate_script(reply.text, Language::ur).valid);
    EXPECT_NE(reply.text_en.find("falling"), std::string::npos);
    bool window = false;
    for (const auto& c : reply.citations) {
        EXPECT_TRUE(citation_resolves(c, rig.store, rig.farm.farm_id, nullptr, rig.feeds.get_forecast(rig.farm.location, 2)))
            << c.marker();
        window = window || c.kind == CitationKind::window;
    }
    EXPECT_TRUE(window);
    EXPECT_EQ(rig.store.chat_history(rig.farm.farm_id).size(), 1u);
}

TEST(Summary, NoDataStillProducesAGapNotice) {
    Rig rig;
    Orchestrator orch(rig.deps(rig.mock));
    const auto reply = orch.daily_summary(rig.farm, kNow + 30 * kSecondsPerDay);
    EXPECT_FALSE(reply.status);
    EXPECT_NE(reply.text_en.find("No sensor data"), std::string::npos);
}

TEST(Scheduler, OncePerLocalDayAtConfiguredTime) {
    Rig rig;
    Orchestrator orch(rig.deps(rig.mock));
    std::vector<Timestamp> fired;
    SummaryScheduler sched(rig.store, orch, [&](const FarmProfile&, const AdvisoryReply& r) { fired.push_back(r.generated_at); });
    FarmProfile idle;
    idle.phone = "+923001110002";
    idle.crops = {"maize"};
    idle.summary_times = {"07:00"};
    (void)rig.store.add_farm(idle);

    const Timestamp day0 = (kNow / kSecondsPerDay) * kSecondsPerDay;
    std::size_t total = 0;
    for (Timestamp t = day0; t < day0 + 2 * kSecondsPerDay; t += 60) {
        total += sched.tick(t);
    }
    ASSERT_EQ(total, 2u);
    // 07:00 at UTC+5 is 02:00 UTC.
    EXPECT_EQ(fired[0], day0 + 2 * 3600);
    EXPECT_EQ(fired[1], day0 + kSecondsPerDay + 2 * 3600);
    EXPECT_EQ(sched.tick(day0 + kSecondsPerDay + 2 * 3600), 0u);
}

TEST(Scheduler, CoarseTicksStillFireOnce) {
    Rig rig;
    Orchestrator orch(rig.deps(rig.mock));
    std::size_t fired = 0;
    SummaryScheduler sched(rig.store, orch, [&](const FarmProfile&, const AdvisoryReply&) { ++fired; }, 3600);
    const Timestamp day0 = (kNow / kSecondsPerDay) * kSecondsPerDay;
    for (Timestamp t = day0; t < day0 + 3 * kSecondsPerDay; t += 3 * 3600) {
        (void)sched.tick(t);
    }
    EXPECT_EQ(fired, 3u);
}
