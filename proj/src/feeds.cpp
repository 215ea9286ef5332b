#include "agri/feeds.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "agri/errors.hpp"

namespace agri::feeds {

namespace fs = std::filesystem;

namespace {

double round1(double v) { return std::round(v * 10.0) / 10.0; }

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) {
        throw ProviderUnavailable(fmt::format("fixture {} not found", p.string()));
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ProviderUnavailable(fmt::format("fixture {}: {}", p.string(), e.what()));
    }
}

void write_json(const fs::path& p, const nlohmann::json& j) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) {
        throw ConfigError(fmt::format("cannot write fixture {}", p.string()));
    }
    out << j.dump(2) << '\n';
}

std::string cache_key(const Location& where, int horizon) {
    return fmt::format("{}|{}", location_key(where), horizon);
}

} // namespace

Citation ForecastWindow::ref() const {
    return {CitationKind::forecast, fmt::format("{}@{:.1f},{:.1f}", issued_at, round1(location.lat), round1(location.lon))};
}

double ForecastWindow::rain_total(std::size_t n) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < std::min(n, days.size()); ++i) {
        sum += days[i].rain_mm;
    }
    return sum;
}

void ForecastWindow::validate() const {
    if (days.empty()) {
        throw std::invalid_argument("forecast has no days");
    }
    for (std::size_t i = 1; i < days.size(); ++i) {
        if (parse_date(days[i].date) != parse_date(days[i - 1].date) + kSecondsPerDay) {
            throw std::invalid_argument(
                fmt::format("forecast dates not contiguous at {} -> {}", days[i - 1].date, days[i].date));
        }
    }
}

Citation PriceSeries::ref() const {
    return {CitationKind::market, fmt::format("{}@{}", crop, points.empty() ? std::string("none") : points.back().date)};
}

stats::LinearFit PriceSeries::trend() const {
    std::vector<double> x;
    std::vector<double> y;
    if (points.empty()) {
        throw InsufficientData("price trend of empty series");
    }
    const auto t0 = parse_date(points.front().date);
    for (const auto& p : points) {
        x.push_back(static_cast<double>(parse_date(p.date) - t0) / static_cast<double>(kSecondsPerDay));
        y.push_back(p.price);
    }
    return stats::ols(x, y);
}

void PriceSeries::validate() const {
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (parse_date(points[i].date) <= parse_date(points[i - 1].date)) {
            throw std::invalid_argument("price dates must be strictly ascending");
        }
    }
}

nlohmann::json to_json(const ForecastWindow& w) {
    nlohmann::json days = nlohmann::json::array();
    for (const auto& d : w.days) {
        days.push_back({{"date", d.date}, {"rain_mm", d.rain_mm}, {"t_min", d.t_min}, {"t_max", d.t_max}});
    }
    return {{"location", {{"lat", w.location.lat}, {"lon", w.location.lon}}},
            {"issued_at", w.issued_at},
            {"days", days}};
}

ForecastWindow forecast_from_json(const nlohmann::json& j) {
    ForecastWindow w;
    w.location.lat = j.at("location").at("lat").get<double>();
    w.location.lon = j.at("location").at("lon").get<double>();
    w.issued_at = j.at("issued_at").get<std::string>();
    for (const auto& d : j.at("days")) {
        w.days.push_back({d.at("date").get<std::string>(), d.at("rain_mm").get<double>(),
                          d.at("t_min").get<double>(), d.at("t_max").get<double>()});
    }
    w.validate();
    return w;
}

nlohmann::json to_json(const PriceSeries& s) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : s.points) {
        pts.push_back({{"date", p.date}, {"price", p.price}, {"currency", p.currency}});
    }
    return {{"crop", s.crop}, {"points", pts}};
}

PriceSeries prices_from_json(const nlohmann::json& j) {
    PriceSeries s;
    s.crop = j.at("crop").get<std::string>();
    for (const auto& p : j.at("points")) {
        s.points.push_back(
            {p.at("date").get<std::string>(), p.at("price").get<double>(), p.value("currency", std::string("PKR"))});
    }
    s.validate();
    return s;
}

void check_horizon(int horizon_days) {
    if (horizon_days < 1 || horizon_days > kMaxHorizonDays) {
        throw std::invalid_argument(fmt::format("forecast horizon {} outside [1, {}]", horizon_days, kMaxHorizonDays));
    }
}

std::string location_key(const Location& where) {
    return fmt::format("{:.1f}_{:.1f}", round1(where.lat), round1(where.lon));
}

namespace {

ForecastWindow truncate(ForecastWindow w, int horizon_days) {
    if (w.days.size() < static_cast<std::size_t>(horizon_days)) {
        throw ProviderUnavailable(
            fmt::format("forecast covers {} days, {} requested", w.days.size(), horizon_days));
    }
    w.days.resize(static_cast<std::size_t>(horizon_days));
    return w;
}

PriceSeries tail(PriceSeries s, int days) {
    if (days < 0) {
        throw std::invalid_argument("price window must be non-negative");
    }
    if (s.points.size() > static_cast<std::size_t>(days)) {
        s.points.erase(s.points.begin(), s.points.end() - days);
    }
    return s;
}

} // namespace

ReplayProvider::ReplayProvider(fs::path root, std::optional<std::string> as_of)
    : root_(std::move(root)), as_of_(std::move(as_of)) {}

ForecastWindow ReplayProvider::get_forecast(const Location& where, int horizon_days) {
    check_horizon(horizon_days);
    auto dir = root_ / "forecast" / location_key(where);
    if (!fs::is_directory(dir)) {
        throw ProviderUnavailable(fmt::format("no forecast fixtures for {}", location_key(where)));
    }
    std::optional<fs::path> best;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") {
            continue;
        }
        auto date = entry.path().stem().string();
        if (as_of_ && date > *as_of_) {
            continue;
        }
        if (!best || date > best->stem().string()) {
            best = entry.path();
        }
    }
    if (!best) {
        throw ProviderUnavailable(fmt::format("no forecast issued by {} for {}", as_of_.value_or("now"),
                                              location_key(where)));
    }
    try {
        return truncate(forecast_from_json(read_json(*best)), horizon_days);
    } catch (const nlohmann::json::exception& e) {
        throw ProviderUnavailable(fmt::format("fixture {}: {}", best->string(), e.what()));
    } catch (const std::invalid_argument& e) {
        throw ProviderUnavailable(fmt::format("fixture {}: {}", best->string(), e.what()));
    }
}

PriceSeries ReplayProvider::get_prices(const std::string& crop, int days) {
    auto path = root_ / "prices" / (crop + ".json");
    if (!fs::exists(path)) {
        return PriceSeries{crop, {}};
    }
    try {
        return tail(prices_from_json(read_json(path)), days);
    } catch (const nlohmann::json::exception& e) {
        throw ProviderUnavailable(fmt::format("fixture {}: {}", path.string(), e.what()));
    }
}

void write_forecast_fixture(const fs::path& root, const ForecastWindow& w) {
    w.validate();
    write_json(root / "forecast" / location_key(w.location) / (w.issued_at + ".json"), to_json(w));
}

void write_price_fixture(const fs::path& root, const PriceSeries& s) {
    s.validate();
    write_json(root / "prices" / (s.crop + ".json"), to_json(s));
}

void StaticProvider::set_forecast(ForecastWindow w) {
    std::lock_guard lock(mu_);
    forecast_ = std::move(w);
}

void StaticProvider::set_prices(PriceSeries s) {
    std::lock_guard lock(mu_);
    prices_[s.crop] = std::move(s);
}

ForecastWindow StaticProvider::get_forecast(const Location& /*where*/, int horizon_days) {
    check_horizon(horizon_days);
    std::lock_guard lock(mu_);
    if (!forecast_) {
        throw ProviderUnavailable("no forecast configured");
    }
    return truncate(*forecast_, horizon_days);
}

PriceSeries StaticProvider::get_prices(const std::string& crop, int days) {
    std::lock_guard lock(mu_);
    auto it = prices_.find(crop);
    if (it == prices_.end()) {
        return PriceSeries{crop, {}};
    }
    return tail(it->second, days);
}

CachingProvider::CachingProvider(FeedProvider& inner, const TimeSource& clock, double ttl_s)
    : inner_(inner), clock_(clock), ttl_s_(ttl_s) {}

ForecastWindow CachingProvider::get_forecast(const Location& where, int horizon_days) {
    const auto key = cache_key(where, horizon_days);
    {
        std::lock_guard lock(mu_);
        if (auto it = forecasts_.find(key); it != forecasts_.end() && clock_.now() - it->second.first < ttl_s_) {
            return it->second.second;
        }
    }
    auto w = inner_.get_forecast(where, horizon_days);
    std::lock_guard lock(mu_);
    forecasts_[key] = {clock_.now(), w};
    return w;
}

PriceSeries CachingProvider::get_prices(const std::string& crop, int days) {
    const auto key = fmt::format("{}|{}", crop, days);
    {
        std::lock_guard lock(mu_);
        if (auto it = prices_.find(key); it != prices_.end() && clock_.now() - it->second.first < ttl_s_) {
            return it->second.second;
        }
    }
    auto s = inner_.get_prices(crop, days);
    std::lock_guard lock(mu_);
    prices_[key] = {clock_.now(), s};
    return s;
}

} // namespace agri::feeds
