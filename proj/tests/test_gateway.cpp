#include <map>
#include <random>
#include <set>
#include <thread>

#include <gtest/gtest.h>

#include "agri/errors.hpp"
#include "agri/gateway.hpp"
#include "support.hpp"

using namespace agri;
using namespace agri::gateway;

namespace {

// Receiver with dedup by (node, seq); acks the highest seq it holds per node.
// Optionally processes a batch but loses the acknowledgement.
class RecordingUplink final : public Uplink {
  public:
    AckMap post(std::span<const SensorReading> batch) override {
        ++posts;
        if (down) {
            throw UplinkUnavailable("down");
        }
        AckMap acked;
        for (const auto& r : batch) {
            ++received;
            stored[r.node_id].insert(r.seq);
            acked[r.node_id] = std::max(acked[r.node_id], r.seq);
        }
        if (lose_ack) {
            throw UplinkUnavailable("ack lost");
        }
        return acked;
    }

    bool down = false;
    bool lose_ack = false;
    std::size_t posts = 0;
    std::size_t received = 0;
    std::map<std::string, std::set<std::uint64_t>> stored;
};

} // namespace

TEST(Capacity, SeventyTwoHours) {
    EXPECT_EQ(capacity_for_interval(300), 864u);
    EXPECT_EQ(capacity_for_interval(600), 432u);
    EXPECT_EQ(capacity_for_interval(7), 37029u);
    EXPECT_THROW((void)capacity_for_interval(0), std::invalid_argument);
}

TEST(Buffer, EvictsOldestPerNode) {
    GatewayBuffer buf(3);
    for (std::uint64_t s = 1; s <= 3; ++s) {
        EXPECT_FALSE(buf.enqueue(fx::reading("a", s, s)).evicted);
    }
    buf.enqueue(fx::reading("b", 1, 1));
    auto res = buf.enqueue(fx::reading("a", 4, 4));
    ASSERT_TRUE(res.evicted);
    EXPECT_EQ(res.evicted->seq, 1u);
    EXPECT_EQ(buf.size("a"), 3u);
    EXPECT_EQ(buf.size("b"), 1u);
    EXPECT_EQ(buf.evicted_total(), 1u);
}

TEST(Buffer, DuplicatesAndAckedSeqIgnored) {
    GatewayBuffer buf(10);
    buf.enqueue(fx::reading("a", 1, 1));
    EXPECT_TRUE(buf.enqueue(fx::reading("a", 1, 1)).duplicate);
    EXPECT_EQ(buf.acknowledge({{"a", 1}}), 1u);
    EXPECT_TRUE(buf.enqueue(fx::reading("a", 1, 1)).duplicate);
    EXPECT_EQ(buf.size(), 0u);
}

TEST(Buffer, OutOfOrderArrivalKeptInSeqOrder) {
    GatewayBuffer buf(10);
    buf.enqueue(fx::reading("a", 3, 30));
    buf.enqueue(fx::reading("a", 1, 10));
    buf.enqueue(fx::reading("a", 2, 20));
    const auto snap = buf.snapshot();
    ASSERT_EQ(snap.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(snap[i].seq, i + 1);
    }
}

TEST(Gateway, FlushDropsAckedReadings) {
    RecordingUplink up;
    Gateway gw({}, up);
    gw.enqueue(fx::reading("a", 1, 0));
    gw.enqueue(fx::reading("a", 2, 300));
    auto rep = gw.flush(300);
    EXPECT_EQ(rep.sent, 2u);
    EXPECT_EQ(gw.buffer().size(), 0u);
    EXPECT_EQ(gw.last_acked().at("a"), 2u);
    EXPECT_EQ(gw.mode(), UplinkMode::online);
}

TEST(Gateway, OutageBacksOffExponentially) {
    RecordingUplink up;
    up.down = true;
    GatewayConfig cfg;
    cfg.backoff_base_s = 5;
    cfg.backoff_factor = 2;
    cfg.backoff_cap_s = 30;
    Gateway gw(cfg, up);
    gw.enqueue(fx::reading("a", 1, 0));
    std::vector<double> backoffs;
    for (int i = 0; i < 5; ++i) {
        EXPECT_THROW(gw.flush(i), UplinkUnavailable);
        backoffs.push_back(gw.retry_backoff_s());
    }
    EXPECT_EQ(backoffs, (std::vector<double>{5, 10, 20, 30, 30}));
    EXPECT_EQ(gw.mode(), UplinkMode::outage);
    EXPECT_EQ(gw.next_retry_at(), 4 + 30);
    // Tick respects the backoff.
    up.down = false;
    EXPECT_FALSE(gw.tick(10));
    EXPECT_TRUE(gw.tick(34));
    EXPECT_EQ(gw.mode(), UplinkMode::online);
    EXPECT_EQ(gw.retry_backoff_s(), 0.0);
}

TEST(Gateway, LostAckRedeliversAndReceiverDedups) {
    RecordingUplink up;
    Gateway gw({}, up);
    gw.enqueue(fx::reading("a", 1, 0));
    up.lose_ack = true;
    EXPECT_THROW(gw.flush(0), UplinkUnavailable);
    up.lose_ack = false;
    gw.flush(100);
    EXPECT_EQ(up.received, 2u);
    EXPECT_EQ(up.stored["a"].size(), 1u);
    EXPECT_EQ(gw.buffer().size(), 0u);
}

TEST(Gateway, AlertReadingTriggersFlushWithinOneTick) {
    RecordingUplink up;
    GatewayConfig cfg;
    cfg.band = CropBandTable::load(fx::data_dir() / "crop_bands.json").band_for("cotton");
    Gateway gw(cfg, up);
    gw.enqueue(fx::reading("a", 1, 0));
    ASSERT_TRUE(gw.tick(0));
    gw.enqueue(fx::reading("a", 2, 300));
    EXPECT_FALSE(gw.tick(300));
    auto dry = fx::reading("a", 3, 600);
    dry.set(Metric::moisture, 25.0);
    gw.enqueue(dry);
    EXPECT_TRUE(gw.flush_pending());
    EXPECT_EQ(gw.schedule().current_interval_s, cfg.min_flush_interval_s);
    auto rep = gw.tick(601);
    ASSERT_TRUE(rep);
    EXPECT_EQ(rep->sent, 2u);
}

TEST(Gateway, ElevatedTightensLessOnLossyLink) {
    RecordingUplink up;
    GatewayConfig cfg;
    cfg.band = CropBandTable::load(fx::data_dir() / "crop_bands.json").band_for("cotton");
    auto near_edge = fx::reading("a", 1, 0);
    near_edge.set(Metric::moisture, 41.0);

    Gateway good(cfg, up);
    good.enqueue(near_edge);
    EXPECT_EQ(good.schedule().urgency, Urgency::elevated);
    EXPECT_EQ(good.schedule().current_interval_s, 900 / 4);

    cfg.link_quality = 0.6;
    Gateway lossy(cfg, up);
    lossy.enqueue(near_edge);
    EXPECT_EQ(lossy.schedule().current_interval_s, 900 / 2);
}

TEST(Outage, WindowsRefuse) {
    RecordingUplink up;
    Timestamp now = 0;
    OutageUplink out(up, [&] { return now; }, {{100, 200}});
    const std::vector<SensorReading> batch{fx::reading("a", 1, 0)};
    EXPECT_NO_THROW(out.post(batch));
    now = 100;
    EXPECT_THROW(out.post(batch), UplinkUnavailable);
    now = 200;
    EXPECT_NO_THROW(out.post(batch));
    EXPECT_EQ(out.refused(), 1u);
}

TEST(Outage, ParseSpec) {
    auto w = parse_outage("10,20");
    EXPECT_EQ(w.from, 10);
    EXPECT_EQ(w.to, 20);
    EXPECT_THROW((void)parse_outage("10"), std::invalid_argument);
    EXPECT_THROW((void)parse_outage("a,b"), std::invalid_argument);
    EXPECT_THROW((void)parse_outage("20,10"), std::invalid_argument);
}

TEST(GatewayProperty, RandomOutagesNeverLoseRecentReadings) {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        RecordingUplink up;
        GatewayConfig cfg;
        cfg.sampling_interval_s = 3600; // capacity 72 keeps the test fast
        Gateway gw(cfg, up);
        const std::size_t cap = gw.buffer().capacity_per_node();
        std::bernoulli_distribution toggle(0.05);
        std::bernoulli_distribution lose(0.1);
        AckMap prev_acked;
        const int steps = 400;
        std::uint64_t evicted_max = 0;
        for (int i = 1; i <= steps; ++i) {
            const Timestamp now = i * 3600;
            if (toggle(rng)) {
                up.down = !up.down;
            }
            up.lose_ack = lose(rng);
            for (const auto* node : {"a", "b"}) {
                auto res = gw.enqueue(fx::reading(node, static_cast<std::uint64_t>(i), now));
                if (res.evicted) {
                    evicted_max = std::max(evicted_max, res.evicted->seq);
                }
            }
            (void)gw.tick(now);
            EXPECT_LE(gw.buffer().size("a"), cap);
            EXPECT_LE(gw.buffer().size("b"), cap);
            for (const auto& [node, seq] : gw.last_acked()) {
                EXPECT_GE(seq, prev_acked[node]);
            }
            prev_acked = gw.last_acked();
        }
        up.down = false;
        up.lose_ack = false;
        gw.flush(steps * 3600 + 1);
        for (const auto* node : {"a", "b"}) {
            const auto& got = up.stored[node];
            // Every reading newer than the last eviction arrived.
            for (std::uint64_t s = evicted_max + 1; s <= static_cast<std::uint64_t>(steps); ++s) {
                EXPECT_EQ(got.count(s), 1u) << node << " " << s;
            }
        }
    }
}

TEST(GatewayConcurrency, WriterAndFlusherInterleave) {
    RecordingUplink up;
    Gateway gw({}, up);
    std::atomic<bool> done{false};
    std::thread flusher([&] {
        Timestamp t = 0;
        while (!done) {
            gw.flush(++t);
        }
    });
    // Stays under the per-node capacity so no eviction can happen whatever the interleaving.
    for (std::uint64_t s = 1; s <= 800; ++s) {
        gw.enqueue(fx::reading("a", s, static_cast<Timestamp>(s)));
    }
    done = true;
    flusher.join();
    gw.flush(1'000'000);
    EXPECT_EQ(up.stored["a"].size(), 800u);
    EXPECT_EQ(gw.buffer().size(), 0u);
}
