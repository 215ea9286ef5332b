#include <random>

#include <gtest/gtest.h>

#include "agri/alerts.hpp"
#include "agri/errors.hpp"
#include "agri/pipeline.hpp"
#include "agri/scenario.hpp"
#include "agri/script.hpp"
#include "agri/text.hpp"
#include "support.hpp"

using namespace agri;
using namespace agri::alerts;

namespace {

const CropBandTable& bands() {
    static const auto table = CropBandTable::load(fx::data_dir() / "crop_bands.json");
    return table;
}

const kb::KnowledgeBase& corpus() {
    static const auto kb = [] {
        auto k = std::make_unique<kb::KnowledgeBase>();
        k->ingest_all(kb::load_corpus(fx::data_dir() / "kb" / "corpus"));
        return k;
    }();
    return *kb;
}

feeds::ForecastWindow forecast(Timestamp issued, std::vector<double> rain) {
    feeds::ForecastWindow w;
    w.location = {30.2, 71.5};
    w.issued_at = format_date(issued);
    for (std::size_t i = 0; i < rain.size(); ++i) {
        w.days.push_back({format_date(issued + static_cast<Timestamp>(i) * kSecondsPerDay), rain[i], 25.0, 38.0});
    }
    return w;
}

FarmProfile farm(store::Store& s, const std::string& crop, Language lang, const std::string& node) {
    FarmProfile p;
    p.phone = crop == "cotton" ? "+923001110001" : "+923001110002";
    p.language = lang;
    p.crops = {crop};
    p.location = {30.2, 71.5};
    p.active = true;
    auto f = s.add_farm(p);
    s.attach_node(node, f.farm_id);
    return f;
}

class ThrowingBackend final : public llm::Backend {
  public:
    std::string complete(const llm::ModelRequest&) override { throw BackendTimeout("slow"); }
};

class FixedBackend final : public llm::Backend {
  public:
    explicit FixedBackend(std::string reply) : reply_(std::move(reply)) {}
    std::string complete(const llm::ModelRequest&) override { return reply_; }

  private:
    std::string reply_;
};

bool cites_lime_passage(const Alert& a) {
    for (const auto& c : a.citations) {
        if (c.kind != CitationKind::passage) {
            continue;
        }
        auto [doc, chunk] = kb::parse_passage_id(c.id);
        if (text::contains(text::to_lower(corpus().find(doc, chunk).text), "lime")) {
            return true;
        }
    }
    return false;
}

} // namespace

TEST(RuleGate, PriorityOrderAndSeverity) {
    const auto band = bands().band_for("cotton");
    auto r = fx::reading("n", 1, 0);
    r.set(Metric::temperature, 45.0);
    r.set(Metric::moisture, 30.0);
    r.set(Metric::ph, 5.6);
    r.set(Metric::ec, 50.0);
    const auto c = rule_gate(r, band, std::nullopt);
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c[0].kind, AlertKind::irrigation);
    EXPECT_EQ(c[0].severity, Severity::critical);
    EXPECT_EQ(c[1].kind, AlertKind::acidity);
    // 0.2 below a band 2.2 wide is inside the 10% margin.
    EXPECT_EQ(c[1].severity, Severity::warning);
    EXPECT_EQ(c[2].kind, AlertKind::heat);
    EXPECT_TRUE(rule_gate(fx::reading("n", 1, 0), band, std::nullopt).empty());
}

TEST(RuleGate, RainSuppressesIrrigationOnly) {
    const auto band = bands().band_for("cotton");
    auto r = fx::reading("n", 1, 0);
    r.set(Metric::moisture, 30.0);
    EXPECT_TRUE(rule_gate(r, band, forecast(0, {1, 1, 1, 1, 1})).empty());
    EXPECT_EQ(rule_gate(r, band, forecast(0, {1, 1, 1, 1, 0.9})).size(), 1u);
    // Rain after the assessment horizon does not count.
    EXPECT_EQ(rule_gate(r, band, forecast(0, {0, 0, 0, 0, 0, 40})).size(), 1u);
    r.set(Metric::moisture, 90.0);
    EXPECT_EQ(rule_gate(r, band, forecast(0, {9, 9, 9, 9, 9})).front().kind, AlertKind::waterlogging);
}

TEST(Assess, CottonIrrigationAlertCitesItsInputs) {
    store::Store s;
    const auto f = farm(s, "cotton", Language::ur, "cotton-1");
    const Timestamp t = 1'749'600'000;
    auto r = fx::reading("cotton-1", 1, t);
    r.set(Metric::moisture, 30.0);
    s.append_reading(f.farm_id, r);
    const auto fc = forecast(t, {0, 0, 0, 0, 0});
    llm::MockTranslator tr;
    AlertDeps deps{s, &corpus(), nullptr, tr};
    const auto a = assess_alert(r, f, bands().band_for("cotton"), fc, deps);
    ASSERT_TRUE(a);
    EXPECT_EQ(a->metric, Metric::moisture);
    EXPECT_EQ(a->observed, 30.0);
    EXPECT_EQ(a->language, Language::ur);
    EXPECT_TRUE(llm::validate_script(a->text, Language::ur).valid);
    EXPECT_NE(a->text.find("30%"), std::string::npos);
    EXPECT_NE(a->recommendation.find("No rain"), std::string::npos);
    bool has_forecast = false;
    for (const auto& c : a->citations) {
        EXPECT_TRUE(pipeline::citation_resolves(c, s, f.farm_id, &corpus(), fc)) << c.marker();
        has_forecast = has_forecast || c.kind == CitationKind::forecast;
    }
    EXPECT_TRUE(has_forecast);
    EXPECT_EQ(a->citations.front(), (Citation{CitationKind::reading, "cotton-1#1"}));
}

TEST(Assess, CooldownPerFarmAndMetric) {
    store::Store s;
    const auto f = farm(s, "cotton", Language::en, "n1");
    llm::MockTranslator tr;
    AlertDeps deps{s, nullptr, nullptr, tr};
    const auto band = bands().band_for("cotton");
    auto dry = [&](std::uint64_t seq, Timestamp ts) {
        auto r = fx::reading("n1", seq, ts);
        r.set(Metric::moisture, 30.0);
        s.append_reading(f.farm_id, r);
        return r;
    };
    auto first = assess_alert(dry(1, 1000), f, band, std::nullopt, deps);
    ASSERT_TRUE(first);
    s.append_alert(*first);
    EXPECT_FALSE(assess_alert(dry(2, 1000 + kSecondsPerDay - 1), f, band, std::nullopt, deps));
    // Another metric is not held back by the moisture cooldown.
    auto both = dry(3, 2000);
    both.set(Metric::ph, 4.0);
    const auto ph = assess_alert(both, f, band, std::nullopt, deps);
    ASSERT_TRUE(ph);
    EXPECT_EQ(ph->metric, Metric::ph);
    EXPECT_TRUE(assess_alert(dry(4, 1000 + kSecondsPerDay), f, band, std::nullopt, deps));
}

TEST(Assess, ModelDraftUsedOnlyWhenGrounded) {
    store::Store s;
    const auto f = farm(s, "cotton", Language::en, "n1");
    auto r = fx::reading("n1", 1, 5000);
    r.set(Metric::moisture, 30.0);
    s.append_reading(f.farm_id, r);
    const auto templates = llm::TemplateSet::load(fx::data_dir() / "prompts");
    llm::MockTranslator tr;
    const auto band = bands().band_for("cotton");

    FixedBackend good("Soil moisture is down to 30%. [R:n1#1] Irrigate today.");
    AlertDeps deps{s, nullptr, &good, tr, &templates};
    EXPECT_EQ(assess_alert(r, f, band, std::nullopt, deps)->recommendation, "Soil moisture is down to 30%. Irrigate today.");

    FixedBackend bad("Soil moisture is down to 12%. [R:n1#1]");
    deps.backend = &bad;
    const auto fallback = assess_alert(r, f, band, std::nullopt, deps);
    ASSERT_TRUE(fallback);
    EXPECT_EQ(fallback->recommendation.find("12%"), std::string::npos);
    EXPECT_NE(fallback->recommendation.find("30%"), std::string::npos);

    ThrowingBackend down;
    deps.backend = &down;
    EXPECT_TRUE(assess_alert(r, f, band, std::nullopt, deps));
}

TEST(AssessProperty, NeverThrowsAndAlwaysCitesReading) {
    store::Store s;
    const auto f = farm(s, "spinach", Language::sd, "n1");
    const auto band = bands().band_for("spinach");
    llm::MockTranslator tr;
    ThrowingBackend down;
    const auto templates = llm::TemplateSet::load(fx::data_dir() / "prompts");
    AlertDeps deps{s, &corpus(), &down, tr, &templates};
    deps.policy.cooldown_s = 0;
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> wide(-50.0, 5000.0);
    for (std::uint64_t i = 1; i <= 200; ++i) {
        auto r = fx::reading("n1", i, 1'760'000'000 + static_cast<Timestamp>(i * 300));
        for (auto m : kAllMetrics) {
            if (rng() % 3 == 0) {
                r.set(m, wide(rng));
            }
        }
        s.append_reading(f.farm_id, r);
        std::optional<feeds::ForecastWindow> fc;
        if (rng() % 2 == 0) {
            fc = forecast(r.timestamp, {0, 0, 0, 0, 0});
        }
        const auto a = assess_alert(r, f, band, fc, deps);
        const bool expect = !rule_gate(r, band, fc).empty();
        ASSERT_EQ(a.has_value(), expect);
        if (a) {
            EXPECT_FALSE(a->text.empty());
            EXPECT_EQ(a->citations.front(), (Citation{CitationKind::reading, reading_id(r)}));
            for (const auto& c : a->citations) {
                EXPECT_TRUE(pipeline::citation_resolves(c, s, f.farm_id, &corpus(), fc)) << c.marker();
            }
        }
    }
}

TEST(Monitor, SpinachAcidityRepeatsOnCooldown) {
    store::Store s;
    const auto f = farm(s, "spinach", Language::pa, "spinach-1");
    llm::MockTranslator tr;
    AlertMonitor monitor(s, bands(), nullptr, AlertDeps{s, &corpus(), nullptr, tr});
    const auto scenario = load_scenario(fx::data_dir() / "scenarios" / "spinach-acid.json");
    std::vector<Alert> raised;
    for (const auto& r : run_scenario(scenario, 3 * kSecondsPerDay)) {
        EXPECT_GE(r.value(Metric::ph), 4.3);
        EXPECT_LE(r.value(Metric::ph), 4.7);
        s.append_reading(f.farm_id, r);
        if (auto a = monitor.on_reading(f.farm_id, r)) {
            raised.push_back(*a);
        }
    }
    ASSERT_EQ(raised.size(), 3u);
    EXPECT_EQ(s.alerts(f.farm_id).size(), 3u);
    for (std::size_t i = 0; i < raised.size(); ++i) {
        const auto& a = raised[i];
        EXPECT_EQ(a.metric, Metric::ph);
        EXPECT_EQ(a.issued_at, scenario.start_ts + static_cast<Timestamp>(i) * kSecondsPerDay);
        EXPECT_TRUE(cites_lime_passage(a));
        EXPECT_NE(text::to_lower(a.recommendation).find("lime"), std::string::npos);
        EXPECT_TRUE(llm::validate_script(a.text, Language::pa).valid);
        EXPECT_NE(a.text.find(pipeline::format_metric_value(Metric::ph, a.observed)), std::string::npos);
    }
}

TEST(Monitor, CottonDrySpellWithDryForecast) {
    store::Store s;
    const auto f = farm(s, "cotton", Language::ur, "cotton-1");
    const auto scenario = load_scenario(fx::data_dir() / "scenarios" / "cotton-dry.json");
    feeds::StaticProvider feeds(forecast(scenario.start_ts, {0, 0, 0, 0, 0, 0, 0}));
    llm::MockTranslator tr;
    AlertMonitor monitor(s, bands(), &feeds, AlertDeps{s, &corpus(), nullptr, tr});
    std::vector<Alert> raised;
    for (const auto& r : run_scenario(scenario, 4 * kSecondsPerDay)) {
        s.append_reading(f.farm_id, r);
        if (auto a = monitor.on_reading(f.farm_id, r)) {
            raised.push_back(*a);
        }
    }
    ASSERT_EQ(raised.size(), 4u);
    EXPECT_LT(raised.back().observed, raised.front().observed - 4.0);
    for (const auto& a : raised) {
        EXPECT_EQ(a.metric, Metric::moisture);
        EXPECT_NE(a.text.find(pipeline::format_metric_value(Metric::moisture, a.observed)), std::string::npos);
        EXPECT_TRUE(std::any_of(a.citations.begin(), a.citations.end(),
                                [](const Citation& c) { return c.kind == CitationKind::forecast; }));
    }
    // Rain in the forecast stops further irrigation alerts.
    store::Store wet_store;
    const auto g = farm(wet_store, "cotton", Language::ur, "cotton-1");
    feeds::StaticProvider wet(forecast(scenario.start_ts, {0, 6, 0, 0, 0}));
    AlertMonitor wet_monitor(wet_store, bands(), &wet, AlertDeps{wet_store, nullptr, nullptr, tr});
    for (const auto& r : run_scenario(scenario, kSecondsPerDay)) {
        wet_store.append_reading(g.farm_id, r);
        EXPECT_FALSE(wet_monitor.on_reading(g.farm_id, r));
    }
}
