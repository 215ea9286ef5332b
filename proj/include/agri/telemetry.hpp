#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "agri/timeutil.hpp"

namespace agri {

/// The seven channels reported by the soil probe.
enum class Metric : std::uint8_t {
    temperature,
    moisture,
    ph,
    ec,
    nitrogen,
    phosphorus,
    potassium,
};

inline constexpr std::size_t kMetricCount = 7;

inline constexpr std::array<Metric, kMetricCount> kAllMetrics = {
    Metric::temperature, Metric::moisture,   Metric::ph,        Metric::ec,
    Metric::nitrogen,    Metric::phosphorus, Metric::potassium,
};

[[nodiscard]] std::string_view metric_name(Metric m);
[[nodiscard]] std::string_view metric_unit(Metric m);
/// Human label used in generated prose, e.g. "soil moisture".
[[nodiscard]] std::string_view metric_label(Metric m);
/// Accepts the canonical names; throws std::invalid_argument otherwise.
[[nodiscard]] Metric parse_metric(std::string_view name);
[[nodiscard]] std::optional<Metric> try_parse_metric(std::string_view name);

constexpr std::size_t index_of(Metric m) { return static_cast<std::size_t>(m); }

struct Range {
    double lo;
    double hi;
    [[nodiscard]] constexpr bool contains(double v) const { return v >= lo && v <= hi; }
    [[nodiscard]] constexpr double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
    [[nodiscard]] constexpr double width() const { return hi - lo; }
};

/// Physical measurement envelope of the probe.
constexpr Range valid_range(Metric m) {
    switch (m) {
    case Metric::temperature: return {-40.0, 80.0};
    case Metric::moisture: return {0.0, 100.0};
    case Metric::ph: return {3.0, 9.0};
    case Metric::ec: return {0.0, 20000.0};
    case Metric::nitrogen:
    case Metric::phosphorus:
    case Metric::potassium: return {1.0, 2999.0};
    }
    return {0.0, 0.0};
}

using MetricValues = std::array<double, kMetricCount>;

struct SensorReading {
    std::string node_id;
    std::uint64_t seq = 0;
    Timestamp timestamp = 0;
    MetricValues values{};

    [[nodiscard]] double value(Metric m) const { return values[index_of(m)]; }
    void set(Metric m, double v) { values[index_of(m)] = v; }

    bool operator==(const SensorReading&) const = default;
};

/// Citation id of a reading: "node#seq".
[[nodiscard]] std::string reading_id(const SensorReading& r);
[[nodiscard]] std::string reading_id(std::string_view node_id, std::uint64_t seq);

/// Newline-delimited wire record: {"node_id","seq","ts","values":{...}}.
[[nodiscard]] nlohmann::json to_json(const SensorReading& r);
/// Throws std::invalid_argument when a field or any of the seven metrics is missing.
[[nodiscard]] SensorReading reading_from_json(const nlohmann::json& j);
[[nodiscard]] std::string to_ndjson(std::span<const SensorReading> readings);
[[nodiscard]] std::vector<SensorReading> parse_ndjson(std::string_view body);

struct RangeViolation {
    Metric metric;
    double value;
};

/// Reports the first metric, in enum order, whose value lies outside the
/// probe envelope.
[[nodiscard]] std::optional<RangeViolation> validate_reading(const SensorReading& r);

struct MetricProfile {
    double baseline = 0.0;
    double drift_per_day = 0.0;
    /// Standard deviation of additive Gaussian noise.
    double noise = 0.0;
};

struct NodeConfig {
    std::string node_id;
    Timestamp sampling_interval_s = 300;
    std::uint64_t rng_seed = 1;
    std::array<MetricProfile, kMetricCount> profiles{};
    /// Distance to the gateway; used for link-loss simulation when set.
    std::optional<double> distance_m;
};

/// Typical mid-range loam values used when a scenario leaves a metric unset.
[[nodiscard]] std::array<MetricProfile, kMetricCount> default_profiles();

/// Single-threaded, deterministic reading generator for one node.
class NodeSimulator {
  public:
    NodeSimulator(NodeConfig config, Timestamp start);

    /// Emits the next reading. `now` must be at least one sampling interval
    /// past the previous emission (the first emission may happen at `start`).
    SensorReading next_reading(Timestamp now);

    [[nodiscard]] const NodeConfig& config() const { return config_; }
    [[nodiscard]] std::uint64_t seq() const { return seq_; }
    [[nodiscard]] std::optional<Timestamp> last_emission() const { return last_; }

  private:
    NodeConfig config_;
    Timestamp start_;
    std::uint64_t seq_ = 0;
    std::optional<Timestamp> last_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> gauss_{0.0, 1.0};
};

/// Piecewise-linear packet delivery ratio envelope of the node-to-gateway link.
struct LinkModel {
    double p_max = 0.99;
    double d_knee = 100.0;
    double d_90 = 425.0;
    double d_cutoff = 600.0;

    /// Throws std::invalid_argument if the anchors are inconsistent.
    void validate() const;
};

inline constexpr double kPdrAnchor = 0.90;

[[nodiscard]] double delivery_probability(const LinkModel& model, double distance_m);

/// Empirical delivery ratio from `trials` Bernoulli draws.
[[nodiscard]] double simulate_delivery_ratio(const LinkModel& model, double distance_m, std::size_t trials,
                                             std::uint64_t seed);

enum class PowerState : std::uint8_t { tx, sense, proc, sleep };

/// Throws agri::UnknownState for names other than tx, sense, proc, sleep.
[[nodiscard]] PowerState parse_power_state(std::string_view name);

/// Node power draw per state, in milliwatts.
struct PowerModel {
    double tx_mw = 1030.0;
    double sense_mw = 115.0;
    double proc_mw = 482.0;
    double sleep_mw = 0.030;

    void validate() const;
    [[nodiscard]] double draw_mw(PowerState s) const;
};

struct ScheduleEntry {
    PowerState state;
    double duration_s;
};

/// Energy in milliwatt-hours for a sequence of timed power states.
[[nodiscard]] double estimate_energy(const PowerModel& power, std::span<const ScheduleEntry> schedule);

} // namespace agri
