#include <fstream>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "agri/datastore.hpp"
#include "agri/errors.hpp"
#include "support.hpp"

using namespace agri;
using namespace agri::store;

namespace {

FarmProfile profile(const std::string& phone, std::vector<std::string> crops = {"cotton"}) {
    FarmProfile p;
    p.phone = phone;
    p.language = Language::ur;
    p.crops = std::move(crops);
    p.location = {30.2, 71.5};
    p.summary_times = {"07:00"};
    return p;
}

} // namespace

TEST(Farms, AssignsIdsAndRejectsDuplicatePhone) {
    Store s;
    auto a = s.add_farm(profile("+923001110001"));
    auto b = s.add_farm(profile("+923001110002"));
    EXPECT_EQ(a.farm_id, "farm-1");
    EXPECT_EQ(b.farm_id, "farm-2");
    EXPECT_THROW(s.add_farm(profile("+923001110001")), DuplicatePhone);
    EXPECT_THROW(s.add_farm(profile("12345")), std::invalid_argument);
    EXPECT_THROW(s.add_farm(profile("+923001110003", {})), std::invalid_argument);
    EXPECT_EQ(s.farm_by_phone("+923001110002")->farm_id, "farm-2");
    EXPECT_EQ(s.farms().size(), 2u);
}

TEST(Farms, UpdateRequiresKnownFarm) {
    Store s;
    auto a = s.add_farm(profile("+923001110001"));
    a.active = true;
    s.update_farm(a);
    EXPECT_TRUE(s.farm(a.farm_id)->active);
    a.farm_id = "nope";
    EXPECT_THROW(s.update_farm(a), UnknownFarm);
}

TEST(Readings, IdempotentOnNodeSeq) {
    Store s;
    auto f = s.add_farm(profile("+923001110001"));
    const auto r = fx::reading("n1", 1, 100);
    EXPECT_EQ(s.append_reading(f.farm_id, r), AppendResult::stored);
    EXPECT_EQ(s.append_reading(f.farm_id, r), AppendResult::duplicate_ignored);
    EXPECT_EQ(s.reading_count(f.farm_id), 1u);
    EXPECT_THROW(s.append_reading("farm-9", r), UnknownFarm);
}

TEST(Readings, ReadYourWrites) {
    Store s;
    auto f = s.add_farm(profile("+923001110001"));
    for (int i = 0; i < 50; ++i) {
        auto r = fx::reading("n1", static_cast<std::uint64_t>(i + 1), 1000 + i * 300);
        r.set(Metric::moisture, 40.0 + i);
        s.append_reading(f.farm_id, r);
        const auto latest = s.latest(f.farm_id, Metric::moisture);
        ASSERT_TRUE(latest);
        EXPECT_EQ(latest->value, 40.0 + i);
        EXPECT_EQ(latest->seq, static_cast<std::uint64_t>(i + 1));
        EXPECT_EQ(s.window(f.farm_id, Metric::moisture, 0, 1'000'000).size(), static_cast<std::size_t>(i + 1));
    }
}

TEST(Readings, WindowIsHalfOpenAndOrdered) {
    Store s;
    auto f = s.add_farm(profile("+923001110001"));
    s.append_reading(f.farm_id, fx::reading("n2", 1, 300));
    s.append_reading(f.farm_id, fx::reading("n1", 2, 600));
    s.append_reading(f.farm_id, fx::reading("n1", 1, 0));
    const auto w = s.window(f.farm_id, Metric::ph, 0, 600);
    ASSERT_EQ(w.size(), 2u);
    EXPECT_EQ(w[0].ts, 0);
    EXPECT_EQ(w[1].node_id, "n2");
    EXPECT_TRUE(s.window(f.farm_id, Metric::ph, 601, 700).empty());
}

TEST(Readings, LatestTieBreaksOnNodeThenSeq) {
    Store s;
    auto f = s.add_farm(profile("+923001110001"));
    auto a = fx::reading("a", 5, 100);
    auto b = fx::reading("b", 1, 100);
    b.set(Metric::ec, 1234);
    s.append_reading(f.farm_id, a);
    s.append_reading(f.farm_id, b);
    EXPECT_EQ(s.latest(f.farm_id, Metric::ec)->value, 1234);
}

TEST(Aggregate, Ops) {
    std::vector<Sample> v{{0, 3.0, "a", 1}, {1, 1.0, "a", 2}, {2, 5.0, "a", 3}};
    EXPECT_EQ(aggregate(v, AggOp::mean), 3.0);
    EXPECT_EQ(aggregate(v, AggOp::min), 1.0);
    EXPECT_EQ(aggregate(v, AggOp::max), 5.0);
    EXPECT_THROW((void)aggregate(std::vector<Sample>{}, AggOp::mean), InsufficientData);
}

TEST(Trend, RecoversLinearSlopeExactly) {
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> slope_dist(-5.0, 5.0);
    for (int trial = 0; trial < 20; ++trial) {
        Store s;
        auto f = s.add_farm(profile("+923001110001"));
        const double slope = slope_dist(rng);
        const Timestamp t0 = 1'700'000'000;
        for (int i = 0; i < 96; ++i) {
            auto r = fx::reading("n1", static_cast<std::uint64_t>(i + 1), t0 + i * 1800);
            r.set(Metric::moisture, 50.0 + slope * (i * 1800.0 / kSecondsPerDay));
            s.append_reading(f.farm_id, r);
        }
        const auto t = s.detect_trend(f.farm_id, Metric::moisture, 7.0);
        EXPECT_NEAR(t.slope, slope, std::abs(slope) * 1e-9 + 1e-12);
        EXPECT_EQ(t.points, 96u);
        const bool stable = std::abs(t.slope) <= slope_threshold(Metric::moisture);
        EXPECT_EQ(t.flag == TrendFlag::stable, stable);
        if (!stable) {
            EXPECT_EQ(t.flag, slope > 0 ? TrendFlag::rising : TrendFlag::falling);
        }
    }
}

TEST(Trend, WindowAndErrors) {
    Store s;
    auto f = s.add_farm(profile("+923001110001"));
    EXPECT_THROW((void)s.detect_trend(f.farm_id, Metric::ph, 7.0), InsufficientData);
    EXPECT_THROW((void)s.detect_trend("farm-404", Metric::ph, 7.0), UnknownFarm);
    s.append_reading(f.farm_id, fx::reading("n1", 1, 0));
    EXPECT_THROW((void)s.detect_trend(f.farm_id, Metric::ph, 7.0), InsufficientData);
    s.append_reading(f.farm_id, fx::reading("n1", 2, 10 * kSecondsPerDay));
    // The first point lies outside a 7-day window ending at the newest reading.
    EXPECT_THROW((void)s.detect_trend(f.farm_id, Metric::ph, 7.0), InsufficientData);
    EXPECT_EQ(s.detect_trend(f.farm_id, Metric::ph, 10.0).points, 2u);
    EXPECT_THROW((void)s.detect_trend(f.farm_id, Metric::ph, 0.0), std::invalid_argument);
}

TEST(Chat, TimestampsNonDecreasingPerFarm) {
    Store s;
    auto f = s.add_farm(profile("+923001110001"));
    s.append_chat({f.farm_id, Direction::inbound, 500, "hi", Language::ur, MessageKind::text, {}});
    s.append_chat({f.farm_id, Direction::outbound, 400, "late", Language::ur, MessageKind::text, {}});
    const auto h = s.chat_history(f.farm_id);
    ASSERT_EQ(h.size(), 2u);
    EXPECT_EQ(h[1].timestamp, 500);
    EXPECT_EQ(s.recent_chat(f.farm_id, 500 + 8 * kSecondsPerDay).size(), 0u);
    EXPECT_EQ(s.recent_chat(f.farm_id, 600).size(), 2u);
}

TEST(Alerts, LastAlertPerMetric) {
    Store s;
    auto f = s.add_farm(profile("+923001110001"));
    Alert a;
    a.farm_id = f.farm_id;
    a.metric = Metric::ph;
    a.issued_at = 10;
    s.append_alert(a);
    a.issued_at = 20;
    s.append_alert(a);
    EXPECT_EQ(s.last_alert(f.farm_id, Metric::ph)->issued_at, 20);
    EXPECT_FALSE(s.last_alert(f.farm_id, Metric::moisture));
    EXPECT_EQ(s.alerts(f.farm_id).size(), 2u);
}

TEST(Durability, RestartReplaysEverything) {
    fx::TempDir dir;
    std::string farm_id;
    {
        Store s(dir.path());
        auto f = s.add_farm(profile("+923001110001"));
        farm_id = f.farm_id;
        f.active = true;
        s.update_farm(f);
        s.attach_node("n1", farm_id);
        for (std::uint64_t i = 1; i <= 100; ++i) {
            s.append_reading(farm_id, fx::reading("n1", i, static_cast<Timestamp>(i * 300)));
        }
        s.append_reading(farm_id, fx::reading("n1", 5, 1500));
        s.append_chat({farm_id, Direction::inbound, 1, "hello", Language::ur, MessageKind::voice, {}});
        Alert a;
        a.farm_id = farm_id;
        a.metric = Metric::moisture;
        a.citations = {{CitationKind::reading, "n1#3"}};
        a.issued_at = 900;
        s.append_alert(a);
    }
    Store s(dir.path());
    ASSERT_TRUE(s.farm(farm_id));
    EXPECT_TRUE(s.farm(farm_id)->active);
    EXPECT_EQ(s.farm_for_node("n1"), farm_id);
    EXPECT_EQ(s.reading_count(farm_id), 100u);
    EXPECT_EQ(s.reading("n1", 42)->timestamp, 42 * 300);
    EXPECT_EQ(s.chat_history(farm_id).front().kind, MessageKind::voice);
    EXPECT_EQ(s.alerts(farm_id).front().citations.front().id, "n1#3");
    // New farms continue the id sequence.
    EXPECT_EQ(s.add_farm(profile("+923001110002")).farm_id, "farm-2");
}

TEST(Durability, ManifestChecked) {
    fx::TempDir dir;
    {
        std::ofstream m(dir.path() / "MANIFEST.json");
        m << R"({"format": "agri-store", "version": 99})";
    }
    EXPECT_THROW(Store{dir.path()}, ConfigError);
}

TEST(Concurrency, ReadersSeeConsistentWindows) {
    Store s;
    auto f = s.add_farm(profile("+923001110001"));
    std::atomic<bool> done{false};
    std::atomic<int> torn{0};
    std::thread reader([&] {
        while (!done) {
            const auto w = s.window(f.farm_id, Metric::moisture, 0, 1'000'000'000);
            for (std::size_t i = 1; i < w.size(); ++i) {
                if (w[i].seq != w[i - 1].seq + 1) {
                    ++torn;
                }
            }
        }
    });
    for (std::uint64_t i = 1; i <= 3000; ++i) {
        s.append_reading(f.farm_id, fx::reading("n1", i, static_cast<Timestamp>(i)));
    }
    done = true;
    reader.join();
    EXPECT_EQ(torn.load(), 0);
}
