#include "agri/telemetry.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "agri/errors.hpp"

namespace agri {

namespace {

constexpr std::array<std::string_view, kMetricCount> kNames = {
    "temperature", "moisture", "ph", "ec", "nitrogen", "phosphorus", "potassium"};

constexpr std::array<std::string_view, kMetricCount> kUnits = {"°C", "%", "", "µS/cm",
                                                               "mg/kg", "mg/kg", "mg/kg"};

constexpr std::array<std::string_view, kMetricCount> kLabels = {
    "soil temperature", "soil moisture", "soil pH", "soil EC", "nitrogen", "phosphorus", "potassium"};

} // namespace

std::string_view metric_name(Metric m) { return kNames[index_of(m)]; }
std::string_view metric_unit(Metric m) { return kUnits[index_of(m)]; }
std::string_view metric_label(Metric m) { return kLabels[index_of(m)]; }

std::optional<Metric> try_parse_metric(std::string_view name) {
    for (auto m : kAllMetrics) {
        if (metric_name(m) == name) {
            return m;
        }
    }
    return std::nullopt;
}

Metric parse_metric(std::string_view name) {
    if (auto m = try_parse_metric(name)) {
        return *m;
    }
    throw std::invalid_argument(fmt::format("unknown metric '{}'", name));
}

std::string reading_id(std::string_view node_id, std::uint64_t seq) {
    return fmt::format("{}#{}", node_id, seq);
}

std::string reading_id(const SensorReading& r) { return reading_id(r.node_id, r.seq); }

nlohmann::json to_json(const SensorReading& r) {
    nlohmann::ordered_json values;
    for (auto m : kAllMetrics) {
        values[std::string(metric_name(m))] = r.value(m);
    }
    nlohmann::ordered_json j;
    j["node_id"] = r.node_id;
    j["seq"] = r.seq;
    j["ts"] = r.timestamp;
    j["values"] = values;
    return j;
}

SensorReading reading_from_json(const nlohmann::json& j) {
    try {
        SensorReading r;
        r.node_id = j.at("node_id").get<std::string>();
        r.seq = j.at("seq").get<std::uint64_t>();
        r.timestamp = j.at("ts").get<Timestamp>();
        const auto& values = j.at("values");
        for (auto m : kAllMetrics) {
            r.set(m, values.at(std::string(metric_name(m))).get<double>());
        }
        if (r.node_id.empty()) {
            throw std::invalid_argument("empty node_id");
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(fmt::format("malformed reading record: {}", e.what()));
    }
}

std::string to_ndjson(std::span<const SensorReading> readings) {
    std::string out;
    for (const auto& r : readings) {
        out += to_json(r).dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<SensorReading> parse_ndjson(std::string_view body) {
    std::vector<SensorReading> out;
    std::istringstream in{std::string(body)};
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::invalid_argument(fmt::format("line {}: {}", lineno, e.what()));
        }
        out.push_back(reading_from_json(j));
    }
    return out;
}

std::optional<RangeViolation> validate_reading(const SensorReading& r) {
    for (auto m : kAllMetrics) {
        double v = r.value(m);
        if (!valid_range(m).contains(v)) {
            return RangeViolation{m, v};
        }
    }
    return std::nullopt;
}

std::array<MetricProfile, kMetricCount> default_profiles() {
    std::array<MetricProfile, kMetricCount> p{};
    p[index_of(Metric::temperature)] = {25.0, 0.0, 0.5};
    p[index_of(Metric::moisture)] = {45.0, 0.0, 1.0};
    p[index_of(Metric::ph)] = {7.0, 0.0, 0.05};
    p[index_of(Metric::ec)] = {900.0, 0.0, 20.0};
    p[index_of(Metric::nitrogen)] = {120.0, 0.0, 3.0};
    p[index_of(Metric::phosphorus)] = {40.0, 0.0, 1.5};
    p[index_of(Metric::potassium)] = {180.0, 0.0, 4.0};
    return p;
}

NodeSimulator::NodeSimulator(NodeConfig config, Timestamp start)
    : config_(std::move(config)), start_(start), rng_(config_.rng_seed) {
    if (config_.sampling_interval_s <= 0) {
        throw std::invalid_argument("sampling_interval_s must be positive");
    }
    if (config_.node_id.empty()) {
        throw std::invalid_argument("node_id must not be empty");
    }
}

SensorReading NodeSimulator::next_reading(Timestamp now) {
    if (last_ && now < *last_ + config_.sampling_interval_s) {
        throw std::invalid_argument(fmt::format("node {}: emission at {} precedes next slot {}", config_.node_id,
                                                now, *last_ + config_.sampling_interval_s));
    }
    if (now < start_) {
        throw std::invalid_argument("emission before simulation start");
    }
    SensorReading r;
    r.node_id = config_.node_id;
    r.seq = ++seq_;
    r.timestamp = now;
    const double elapsed_days = static_cast<double>(now - start_) / static_cast<double>(kSecondsPerDay);
    for (auto m : kAllMetrics) {
        const auto& p = config_.profiles[index_of(m)];
        // Always draw so that the RNG stream position does not depend on noise settings.
        const double z = gauss_(rng_);
        r.set(m, valid_range(m).clamp(p.baseline + p.drift_per_day * elapsed_days + p.noise * z));
    }
    last_ = now;
    return r;
}

void LinkModel::validate() const {
    if (!(kPdrAnchor <= p_max && p_max <= 1.0)) {
        throw std::invalid_argument("link model: p_max must lie in [0.90, 1]");
    }
    if (!(0.0 <= d_knee && d_knee < d_90 && d_90 < d_cutoff)) {
        throw std::invalid_argument("link model: require 0 <= d_knee < d_90 < d_cutoff");
    }
}

double delivery_probability(const LinkModel& model, double distance_m) {
    if (distance_m < 0.0) {
        throw std::invalid_argument("distance must be non-negative");
    }
    if (distance_m <= model.d_knee) {
        return model.p_max;
    }
    if (distance_m <= model.d_90) {
        const double f = (distance_m - model.d_knee) / (model.d_90 - model.d_knee);
        return model.p_max + f * (kPdrAnchor - model.p_max);
    }
    if (distance_m <= model.d_cutoff) {
        const double f = (distance_m - model.d_90) / (model.d_cutoff - model.d_90);
        return kPdrAnchor * (1.0 - f);
    }
    return 0.0;
}

double simulate_delivery_ratio(const LinkModel& model, double distance_m, std::size_t trials, std::uint64_t seed) {
    if (trials == 0) {
        throw std::invalid_argument("trials must be positive");
    }
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution delivered(delivery_probability(model, distance_m));
    std::size_t ok = 0;
    for (std::size_t i = 0; i < trials; ++i) {
        ok += delivered(rng) ? 1 : 0;
    }
    return static_cast<double>(ok) / static_cast<double>(trials);
}

PowerState parse_power_state(std::string_view name) {
    if (name == "tx") return PowerState::tx;
    if (name == "sense") return PowerState::sense;
    if (name == "proc") return PowerState::proc;
    if (name == "sleep") return PowerState::sleep;
    throw UnknownState(fmt::format("unknown power state '{}'", name));
}

void PowerModel::validate() const {
    if (!(0.0 < sleep_mw && sleep_mw < sense_mw && sense_mw < proc_mw && proc_mw < tx_mw)) {
        throw std::invalid_argument("power model: require 0 < sleep < sense < proc < tx");
    }
}

double PowerModel::draw_mw(PowerState s) const {
    switch (s) {
    case PowerState::tx: return tx_mw;
    case PowerState::sense: return sense_mw;
    case PowerState::proc: return proc_mw;
    case PowerState::sleep: return sleep_mw;
    }
    throw UnknownState("unknown power state");
}

double estimate_energy(const PowerModel& power, std::span<const ScheduleEntry> schedule) {
    double mw_seconds = 0.0;
    for (const auto& e : schedule) {
        if (e.duration_s < 0.0) {
            throw std::invalid_argument("schedule durations must be non-negative");
        }
        mw_seconds += power.draw_mw(e.state) * e.duration_s;
    }
    return mw_seconds / 3600.0;
}

} // namespace agri
