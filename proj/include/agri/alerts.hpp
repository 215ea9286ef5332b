#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "agri/agronomy.hpp"
#include "agri/common.hpp"
#include "agri/datastore.hpp"
#include "agri/feeds.hpp"
#include "agri/knowledge.hpp"
#include "agri/llm.hpp"
#include "agri/prompt.hpp"

namespace agri::alerts {

enum class AlertKind : std::uint8_t {
    irrigation,
    waterlogging,
    acidity,
    alkalinity,
    salinity,
    nutrient_low,
    nutrient_high,
    heat,
    cold,
};

[[nodiscard]] std::string_view alert_kind_name(AlertKind k);

struct AlertPolicy {
    /// Minimum spacing of alerts for the same (farm, metric).
    Timestamp cooldown_s = kSecondsPerDay;
    /// Low moisture only alerts when the rain forecast over `rain_days` is below this.
    double dry_rain_mm = 5.0;
    int rain_days = 5;
    std::size_t passages = 2;
};

struct AlertCandidate {
    Metric metric = Metric::moisture;
    AlertKind kind = AlertKind::irrigation;
    double observed = 0.0;
    Range band{0.0, 0.0};
    Severity severity = Severity::warning;
};

/// Deterministic gate: every out-of-band metric that warrants an alert, in
/// priority order moisture, pH, EC, N, P, K, temperature. Low moisture is
/// dropped when the forecast brings enough rain; a missing forecast does not
/// suppress it. Severity is critical beyond the band margin.
[[nodiscard]] std::vector<AlertCandidate> rule_gate(const SensorReading& reading, const CropBand& band,
                                                    const std::optional<feeds::ForecastWindow>& forecast,
                                                    const AlertPolicy& policy = {});

struct AlertDeps {
    const store::Store& store;
    const kb::Retriever* retriever = nullptr;
    /// When null the template recommendation is used.
    llm::Backend* backend = nullptr;
    llm::Translator& translator;
    const llm::TemplateSet* templates = nullptr;
    AlertPolicy policy{};
};

/// Highest-priority candidate not in cooldown, turned into an alert with a
/// grounded recommendation (template on model failure) localized into the
/// farm language. Returns std::nullopt when no alert is due. Never throws.
[[nodiscard]] std::optional<Alert> assess_alert(const SensorReading& reading, const FarmProfile& profile,
                                                const CropBand& band,
                                                const std::optional<feeds::ForecastWindow>& forecast,
                                                AlertDeps& deps) noexcept;

/// Runs assessment for stored readings and records the alerts it raises so
/// that cooldowns apply to later readings.
class AlertMonitor {
  public:
    AlertMonitor(store::Store& store, const CropBandTable& bands, feeds::FeedProvider* feeds, AlertDeps deps);

    /// Assesses against the farm's primary crop band. The rain forecast is
    /// fetched only when the reading shows low moisture.
    std::optional<Alert> on_reading(const std::string& farm_id, const SensorReading& reading) noexcept;

  private:
    store::Store& store_;
    const CropBandTable& bands_;
    feeds::FeedProvider* feeds_;
    AlertDeps deps_;
};

} // namespace agri::alerts
