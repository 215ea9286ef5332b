#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agri/agronomy.hpp"
#include "agri/telemetry.hpp"

namespace agri::gateway {

/// Outage horizon the buffer must cover.
inline constexpr Timestamp kBufferHorizon = 72 * kSecondsPerHour;

/// ceil(72 h / interval): 864 readings at the default 300 s cadence.
[[nodiscard]] std::size_t capacity_for_interval(Timestamp sampling_interval_s);

/// Highest acknowledged seq per node.
using AckMap = std::map<std::string, std::uint64_t>;

struct EnqueueResult {
    bool accepted = true;
    /// Set when the reading was already buffered or already acknowledged.
    bool duplicate = false;
    std::optional<SensorReading> evicted;
};

/// Bounded store-and-forward buffer. Each node keeps at most
/// `capacity_per_node` readings; on overflow the node's oldest reading is
/// evicted. All operations are atomic with respect to each other.
class GatewayBuffer {
  public:
    explicit GatewayBuffer(std::size_t capacity_per_node);

    EnqueueResult enqueue(SensorReading reading);

    /// Buffered readings ordered by (timestamp, node_id, seq).
    [[nodiscard]] std::vector<SensorReading> snapshot() const;

    /// Drops readings covered by the ack; returns how many were removed.
    std::size_t acknowledge(const AckMap& acked);

    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::size_t size(const std::string& node_id) const;
    [[nodiscard]] std::size_t capacity_per_node() const { return capacity_; }
    [[nodiscard]] std::uint64_t evicted_total() const;

  private:
    std::size_t capacity_;
    mutable std::mutex mu_;
    std::map<std::string, std::deque<SensorReading>> per_node_;
    AckMap acked_;
    std::uint64_t evicted_total_ = 0;
};

/// Transport to the ingestion endpoint. Implementations throw
/// agri::UplinkUnavailable when the batch may not have been acknowledged.
class Uplink {
  public:
    virtual ~Uplink() = default;
    virtual AckMap post(std::span<const SensorReading> batch) = 0;
};

/// Posts batches as NDJSON to {base_url}/v1/ingest and reads back
/// {"acked": {"node": seq, ...}, "rejected": n}. Transport errors and
/// non-200 statuses raise agri::UplinkUnavailable.
class HttpUplink final : public Uplink {
  public:
    explicit HttpUplink(std::string base_url, double timeout_s = 10.0);
    AckMap post(std::span<const SensorReading> batch) override;

  private:
    std::string base_url_;
    double timeout_s_;
};

/// Refuses every post while the clock lies in one of the [from, to) windows,
/// as if the backhaul were down; otherwise forwards to the wrapped uplink.
class OutageUplink final : public Uplink {
  public:
    struct Window {
        Timestamp from = 0;
        Timestamp to = 0;
    };

    OutageUplink(Uplink& inner, std::function<Timestamp()> clock, std::vector<Window> windows);
    AckMap post(std::span<const SensorReading> batch) override;
    [[nodiscard]] std::size_t refused() const { return refused_; }

  private:
    Uplink& inner_;
    std::function<Timestamp()> clock_;
    std::vector<Window> windows_;
    std::size_t refused_ = 0;
};

/// Parses "from,to" (Unix seconds). Throws std::invalid_argument.
[[nodiscard]] OutageUplink::Window parse_outage(std::string_view spec);

enum class UplinkMode : std::uint8_t { online, outage };

struct FlushReport {
    std::size_t sent = 0;
    AckMap acked_through;
};

struct TransmitSchedule {
    Timestamp base_interval_s = 900;
    Timestamp min_interval_s = 60;
    Timestamp current_interval_s = 900;
    Urgency urgency = Urgency::routine;
};

struct GatewayConfig {
    Timestamp sampling_interval_s = 300;
    Timestamp base_flush_interval_s = 900;
    Timestamp min_flush_interval_s = 60;
    double backoff_base_s = 5.0;
    double backoff_factor = 2.0;
    double backoff_cap_s = 300.0;
    /// Crop band used to grade urgency; without one every reading is routine.
    std::optional<CropBand> band;
    /// Estimated delivery probability of the uplink path, in [0, 1].
    double link_quality = 1.0;
};

class Gateway {
  public:
    Gateway(GatewayConfig config, Uplink& uplink);

    /// Buffers a reading that already passed validate_reading and updates the
    /// transmit schedule from its urgency. Alert-class readings request an
    /// immediate flush on the next tick.
    EnqueueResult enqueue(const SensorReading& reading);

    /// Sends every buffered reading as one batch. On success the acknowledged
    /// prefix is dropped; on agri::UplinkUnavailable the gateway enters outage
    /// mode, schedules a retry with exponential backoff and rethrows.
    FlushReport flush(Timestamp now);

    /// Scheduler step: flushes when a flush is due and no retry backoff is
    /// pending. Returns the report when a flush succeeded.
    std::optional<FlushReport> tick(Timestamp now);

    [[nodiscard]] UplinkMode mode() const;
    [[nodiscard]] double retry_backoff_s() const;
    [[nodiscard]] Timestamp next_retry_at() const;
    [[nodiscard]] AckMap last_acked() const;
    [[nodiscard]] TransmitSchedule schedule() const;
    [[nodiscard]] bool flush_pending() const;
    [[nodiscard]] const GatewayBuffer& buffer() const { return buffer_; }

  private:
    void update_schedule(Urgency u);

    GatewayConfig config_;
    Uplink& uplink_;
    GatewayBuffer buffer_;

    mutable std::mutex state_mu_;
    std::mutex flush_mu_;
    UplinkMode mode_ = UplinkMode::online;
    double backoff_s_ = 0.0;
    Timestamp next_retry_at_ = 0;
    Timestamp last_flush_at_ = 0;
    bool flushed_once_ = false;
    bool flush_pending_ = false;
    AckMap last_acked_;
    TransmitSchedule schedule_;
};

} // namespace agri::gateway
