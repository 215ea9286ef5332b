#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agri/common.hpp"
#include "agri/stats.hpp"

namespace agri::feeds {

struct ForecastDay {
    std::string date; // YYYY-MM-DD
    double rain_mm = 0.0;
    double t_min = 0.0;
    double t_max = 0.0;

    bool operator==(const ForecastDay&) const = default;
};

struct ForecastWindow {
    Location location;
    std::string issued_at; // YYYY-MM-DD
    std::vector<ForecastDay> days;

    /// Id "issued_at@lat,lon" with coordinates rounded to 0.1°.
    [[nodiscard]] Citation ref() const;
    /// Total rain over the first `days` entries (all entries if fewer).
    [[nodiscard]] double rain_total(std::size_t days) const;
    /// Throws std::invalid_argument unless dates are contiguous and non-empty.
    void validate() const;

    bool operator==(const ForecastWindow& o) const {
        return issued_at == o.issued_at && days == o.days && location.lat == o.location.lat &&
               location.lon == o.location.lon;
    }
};

struct PricePoint {
    std::string date;
    double price = 0.0;
    std::string currency;

    bool operator==(const PricePoint&) const = default;
};

struct PriceSeries {
    std::string crop;
    std::vector<PricePoint> points;

    [[nodiscard]] Citation ref() const;
    /// OLS slope in currency units per day. Throws agri::InsufficientData.
    [[nodiscard]] stats::LinearFit trend() const;
    void validate() const;

    bool operator==(const PriceSeries&) const = default;
};

[[nodiscard]] nlohmann::json to_json(const ForecastWindow& w);
[[nodiscard]] ForecastWindow forecast_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const PriceSeries& s);
[[nodiscard]] PriceSeries prices_from_json(const nlohmann::json& j);

inline constexpr int kMaxHorizonDays = 14;

/// Weather and market source. Implementations map every transport or data
/// failure to agri::ProviderUnavailable.
class FeedProvider {
  public:
    virtual ~FeedProvider() = default;
    /// Exactly `horizon_days` entries, 1 <= horizon_days <= 14.
    virtual ForecastWindow get_forecast(const Location& where, int horizon_days) = 0;
    /// The most recent `days` points, dates ascending.
    virtual PriceSeries get_prices(const std::string& crop, int days) = 0;
};

/// Throws std::invalid_argument outside [1, 14].
void check_horizon(int horizon_days);

/// Location key used by fixture paths: coordinates rounded to 0.1°, e.g. "31.5_74.3".
[[nodiscard]] std::string location_key(const Location& where);

/// Fixture layout:
///   <root>/forecast/<lat>_<lon>/<issue-date>.json
///   <root>/prices/<crop>.json
/// The replay provider serves the newest forecast issued on or before the
/// as-of date (or the newest overall when unset).
class ReplayProvider final : public FeedProvider {
  public:
    explicit ReplayProvider(std::filesystem::path root, std::optional<std::string> as_of = std::nullopt);

    ForecastWindow get_forecast(const Location& where, int horizon_days) override;
    PriceSeries get_prices(const std::string& crop, int days) override;

  private:
    std::filesystem::path root_;
    std::optional<std::string> as_of_;
};

void write_forecast_fixture(const std::filesystem::path& root, const ForecastWindow& w);
void write_price_fixture(const std::filesystem::path& root, const PriceSeries& s);

/// In-memory provider holding one forecast and any number of price series.
class StaticProvider final : public FeedProvider {
  public:
    StaticProvider() = default;
    explicit StaticProvider(ForecastWindow forecast) : forecast_(std::move(forecast)) {}

    void set_forecast(ForecastWindow w);
    void set_prices(PriceSeries s);

    ForecastWindow get_forecast(const Location& where, int horizon_days) override;
    PriceSeries get_prices(const std::string& crop, int days) override;

  private:
    std::mutex mu_;
    std::optional<ForecastWindow> forecast_;
    std::map<std::string, PriceSeries> prices_;
};

/// Memoizes responses per request for `ttl_s` seconds.
class CachingProvider final : public FeedProvider {
  public:
    CachingProvider(FeedProvider& inner, const TimeSource& clock, double ttl_s = 900.0);

    ForecastWindow get_forecast(const Location& where, int horizon_days) override;
    PriceSeries get_prices(const std::string& crop, int days) override;

  private:
    FeedProvider& inner_;
    const TimeSource& clock_;
    double ttl_s_;
    std::mutex mu_;
    std::map<std::string, std::pair<double, ForecastWindow>> forecasts_;
    std::map<std::string, std::pair<double, PriceSeries>> prices_;
};

/// Live adapter for an HTTP forecast/market service. Expects
///   GET {base}/forecast?lat=&lon=&days=  ->
///     {"issued_at": "...", "daily": {"time": [...], "precipitation_sum": [...],
///      "temperature_2m_min": [...], "temperature_2m_max": [...]}}
///   GET {base}/prices?crop=&days=       -> {"crop": ..., "points": [{"date","price","currency"}]}
/// and normalizes them. The API key, when set, is sent as a bearer token.
class HttpFeedProvider final : public FeedProvider {
  public:
    HttpFeedProvider(std::string base_url, std::string api_key = {}, double timeout_s = 10.0);

    ForecastWindow get_forecast(const Location& where, int horizon_days) override;
    PriceSeries get_prices(const std::string& crop, int days) override;

  private:
    std::string base_url_;
    std::string api_key_;
    double timeout_s_;
};

} // namespace agri::feeds
