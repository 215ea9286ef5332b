#include "agri/gateway.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include <fmt/format.h>

#include "agri/errors.hpp"

namespace agri::gateway {

std::size_t capacity_for_interval(Timestamp sampling_interval_s) {
    if (sampling_interval_s <= 0) {
        throw std::invalid_argument("sampling interval must be positive");
    }
    return static_cast<std::size_t>((kBufferHorizon + sampling_interval_s - 1) / sampling_interval_s);
}

GatewayBuffer::GatewayBuffer(std::size_t capacity_per_node) : capacity_(capacity_per_node) {
    if (capacity_ == 0) {
        throw std::invalid_argument("buffer capacity must be positive");
    }
}

EnqueueResult GatewayBuffer::enqueue(SensorReading reading) {
    std::lock_guard lock(mu_);
    EnqueueResult result;
    if (auto it = acked_.find(reading.node_id); it != acked_.end() && reading.seq <= it->second) {
        result.duplicate = true;
        return result;
    }
    auto& q = per_node_[reading.node_id];
    auto pos = std::lower_bound(q.begin(), q.end(), reading.seq,
                                [](const SensorReading& r, std::uint64_t seq) { return r.seq < seq; });
    if (pos != q.end() && pos->seq == reading.seq) {
        result.duplicate = true;
        return result;
    }
    q.insert(pos, std::move(reading));
    if (q.size() > capacity_) {
        result.evicted = std::move(q.front());
        q.pop_front();
        ++evicted_total_;
    }
    return result;
}

std::vector<SensorReading> GatewayBuffer::snapshot() const {
    std::lock_guard lock(mu_);
    std::vector<SensorReading> out;
    for (const auto& [node, q] : per_node_) {
        out.insert(out.end(), q.begin(), q.end());
    }
    std::stable_sort(out.begin(), out.end(), [](const SensorReading& a, const SensorReading& b) {
        return std::tie(a.timestamp, a.node_id, a.seq) < std::tie(b.timestamp, b.node_id, b.seq);
    });
    return out;
}

std::size_t GatewayBuffer::acknowledge(const AckMap& acked) {
    std::lock_guard lock(mu_);
    std::size_t removed = 0;
    for (const auto& [node, seq] : acked) {
        auto& last = acked_[node];
        last = std::max(last, seq);
        auto it = per_node_.find(node);
        if (it == per_node_.end()) {
            continue;
        }
        auto& q = it->second;
        while (!q.empty() && q.front().seq <= last) {
            q.pop_front();
            ++removed;
        }
    }
    return removed;
}

std::size_t GatewayBuffer::size() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& [node, q] : per_node_) {
        n += q.size();
    }
    return n;
}

std::size_t GatewayBuffer::size(const std::string& node_id) const {
    std::lock_guard lock(mu_);
    auto it = per_node_.find(node_id);
    return it == per_node_.end() ? 0 : it->second.size();
}

std::uint64_t GatewayBuffer::evicted_total() const {
    std::lock_guard lock(mu_);
    return evicted_total_;
}

Gateway::Gateway(GatewayConfig config, Uplink& uplink)
    : config_(std::move(config)),
      uplink_(uplink),
      buffer_(capacity_for_interval(config_.sampling_interval_s)) {
    if (config_.min_flush_interval_s <= 0 || config_.min_flush_interval_s > config_.base_flush_interval_s) {
        throw std::invalid_argument("require 0 < min_flush_interval <= base_flush_interval");
    }
    schedule_.base_interval_s = config_.base_flush_interval_s;
    schedule_.min_interval_s = config_.min_flush_interval_s;
    schedule_.current_interval_s = config_.base_flush_interval_s;
}

void Gateway::update_schedule(Urgency u) {
    schedule_.urgency = u;
    switch (u) {
    case Urgency::routine:
        schedule_.current_interval_s = schedule_.base_interval_s;
        break;
    case Urgency::elevated: {
        // A lossy path pays for retransmissions, so it tightens the cadence less.
        const Timestamp divisor = config_.link_quality >= kPdrAnchor ? 4 : 2;
        schedule_.current_interval_s =
            std::max(schedule_.min_interval_s, schedule_.base_interval_s / divisor);
        break;
    }
    case Urgency::alert:
        schedule_.current_interval_s = schedule_.min_interval_s;
        flush_pending_ = true;
        break;
    }
}

EnqueueResult Gateway::enqueue(const SensorReading& reading) {
    auto result = buffer_.enqueue(reading);
    if (!result.duplicate && config_.band) {
        auto u = classify_urgency(reading, *config_.band);
        std::lock_guard lock(state_mu_);
        update_schedule(u);
    }
    return result;
}

FlushReport Gateway::flush(Timestamp now) {
    std::lock_guard flush_lock(flush_mu_);
    auto batch = buffer_.snapshot();
    FlushReport report;
    if (batch.empty()) {
        std::lock_guard lock(state_mu_);
        mode_ = UplinkMode::online;
        flush_pending_ = false;
        last_flush_at_ = now;
        flushed_once_ = true;
        report.acked_through = last_acked_;
        return report;
    }
    AckMap acked;
    try {
        acked = uplink_.post(batch);
    } catch (const UplinkUnavailable&) {
        std::lock_guard lock(state_mu_);
        mode_ = UplinkMode::outage;
        backoff_s_ = backoff_s_ == 0.0 ? config_.backoff_base_s
                                       : std::min(backoff_s_ * config_.backoff_factor, config_.backoff_cap_s);
        next_retry_at_ = now + static_cast<Timestamp>(std::ceil(backoff_s_));
        throw;
    }
    buffer_.acknowledge(acked);
    std::lock_guard lock(state_mu_);
    for (const auto& [node, seq] : acked) {
        auto& last = last_acked_[node];
        last = std::max(last, seq);
    }
    mode_ = UplinkMode::online;
    backoff_s_ = 0.0;
    flush_pending_ = false;
    last_flush_at_ = now;
    flushed_once_ = true;
    report.sent = batch.size();
    report.acked_through = last_acked_;
    return report;
}

std::optional<FlushReport> Gateway::tick(Timestamp now) {
    {
        std::lock_guard lock(state_mu_);
        if (mode_ == UplinkMode::outage && now < next_retry_at_) {
            return std::nullopt;
        }
        const bool due = flush_pending_ || mode_ == UplinkMode::outage || !flushed_once_ ||
                         now - last_flush_at_ >= schedule_.current_interval_s;
        if (!due) {
            return std::nullopt;
        }
    }
    try {
        return flush(now);
    } catch (const UplinkUnavailable&) {
        return std::nullopt;
    }
}

UplinkMode Gateway::mode() const {
    std::lock_guard lock(state_mu_);
    return mode_;
}

double Gateway::retry_backoff_s() const {
    std::lock_guard lock(state_mu_);
    return backoff_s_;
}

Timestamp Gateway::next_retry_at() const {
    std::lock_guard lock(state_mu_);
    return next_retry_at_;
}

AckMap Gateway::last_acked() const {
    std::lock_guard lock(state_mu_);
    return last_acked_;
}

TransmitSchedule Gateway::schedule() const {
    std::lock_guard lock(state_mu_);
    return schedule_;
}

bool Gateway::flush_pending() const {
    std::lock_guard lock(state_mu_);
    return flush_pending_;
}

} // namespace agri::gateway

namespace agri::gateway {

OutageUplink::OutageUplink(Uplink& inner, std::function<Timestamp()> clock, std::vector<Window> windows)
    : inner_(inner), clock_(std::move(clock)), windows_(std::move(windows)) {}

AckMap OutageUplink::post(std::span<const SensorReading> batch) {
    const auto now = clock_();
    for (const auto& w : windows_) {
        if (now >= w.from && now < w.to) {
            ++refused_;
            throw UplinkUnavailable(fmt::format("uplink down until {}", w.to));
        }
    }
    return inner_.post(batch);
}

OutageUplink::Window parse_outage(std::string_view spec) {
    const auto comma = spec.find(',');
    if (comma == std::string_view::npos) {
        throw std::invalid_argument(fmt::format("outage '{}' is not 'from,to'", spec));
    }
    auto num = [&](std::string_view part) {
        Timestamp v = 0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (ec != std::errc{} || ptr != part.data() + part.size()) {
            throw std::invalid_argument(fmt::format("outage bound '{}' is not an integer", part));
        }
        return v;
    };
    OutageUplink::Window w{num(spec.substr(0, comma)), num(spec.substr(comma + 1))};
    if (w.to <= w.from) {
        throw std::invalid_argument("outage must end after it starts");
    }
    return w;
}

} // namespace agri::gateway
