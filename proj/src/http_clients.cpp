// HTTP adapters: model backend, feed provider and gateway uplink.

#include <cctype>
#include <cstdlib>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "agri/errors.hpp"
#include "agri/feeds.hpp"
#include "agri/gateway.hpp"
#include "agri/llm.hpp"
#include "agri/text.hpp"

namespace agri {

namespace {

using nlohmann::json;

struct Endpoint {
    std::string origin; // scheme://host[:port]
    std::string prefix; // path without trailing '/'
};

Endpoint split_url(const std::string& url) {
    const auto scheme = url.find("://");
    const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    Endpoint e;
    e.origin = path_start == std::string::npos ? url : url.substr(0, path_start);
    e.prefix = path_start == std::string::npos ? std::string{} : url.substr(path_start);
    while (!e.prefix.empty() && e.prefix.back() == '/') {
        e.prefix.pop_back();
    }
    return e;
}

httplib::Client make_client(const Endpoint& e, double timeout_s) {
    httplib::Client client(e.origin);
    const auto sec = static_cast<time_t>(timeout_s);
    const auto usec = static_cast<time_t>((timeout_s - static_cast<double>(sec)) * 1e6);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
    return client;
}

std::string percent_encode(std::string_view s) {
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) != 0 || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out += fmt::format("%{:02X}", c);
        }
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------

namespace llm {

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) {
        throw ConfigError("remote backend needs an endpoint");
    }
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str())) {
            api_key_ = key;
        }
    }
}

std::string RemoteBackend::complete(const ModelRequest& request) {
    const auto ep = split_url(config_.endpoint);
    auto client = make_client(ep, config_.timeout_s);
    json body{{"model", config_.model},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens},
               {"messages", json::array({{{"role", "system"}, {"content", request.system_prompt}},
                                         {{"role", "user"}, {"content", request.user_payload}}})}};
    httplib::Headers headers;
    if (!api_key_.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }
    auto res = client.Post(ep.prefix + "/v1/chat/completions", headers, body.dump(), "application/json");
    if (!res) {
        if (res.error() == httplib::Error::Read || res.error() == httplib::Error::ConnectionTimeout) {
            throw BackendTimeout(fmt::format("{} stage: {}", stage_name(request.stage), httplib::to_string(res.error())));
        }
        throw BackendError(0, fmt::format("{} stage: {}", stage_name(request.stage), httplib::to_string(res.error())));
    }
    if (res->status != 200) {
        throw BackendError(res->status, fmt::format("{} stage: HTTP {}", stage_name(request.stage), res->status));
    }
    try {
        auto j = json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw BackendError(res->status, fmt::format("malformed completion: {}", e.what()));
    }
}

} // namespace llm

// ---------------------------------------------------------------------------

namespace feeds {

HttpFeedProvider::HttpFeedProvider(std::string base_url, std::string api_key, double timeout_s)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), timeout_s_(timeout_s) {}

namespace {

json fetch_json(const std::string& base, const std::string& path, const std::string& api_key, double timeout_s) {
    const auto ep = split_url(base);
    auto client = make_client(ep, timeout_s);
    httplib::Headers headers;
    if (!api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key);
    }
    auto res = client.Get(ep.prefix + path, headers);
    if (!res) {
        throw ProviderUnavailable(fmt::format("GET {}: {}", path, httplib::to_string(res.error())));
    }
    if (res->status != 200) {
        throw ProviderUnavailable(fmt::format("GET {}: HTTP {}", path, res->status));
    }
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw ProviderUnavailable(fmt::format("GET {}: {}", path, e.what()));
    }
}

} // namespace

ForecastWindow HttpFeedProvider::get_forecast(const Location& where, int horizon_days) {
    check_horizon(horizon_days);
    auto j = fetch_json(base_url_,
                        fmt::format("/forecast?lat={:.4f}&lon={:.4f}&days={}", where.lat, where.lon, horizon_days),
                        api_key_, timeout_s_);
    try {
        ForecastWindow w;
        w.location = where;
        const auto& daily = j.at("daily");
        const auto& dates = daily.at("time");
        w.issued_at = j.value("issued_at", dates.empty() ? std::string{} : dates.at(0).get<std::string>());
        for (std::size_t i = 0; i < dates.size() && static_cast<int>(i) < horizon_days; ++i) {
            ForecastDay d;
            d.date = dates.at(i).get<std::string>();
            d.rain_mm = daily.at("precipitation_sum").at(i).get<double>();
            d.t_min = daily.at("temperature_2m_min").at(i).get<double>();
            d.t_max = daily.at("temperature_2m_max").at(i).get<double>();
            w.days.push_back(d);
        }
        if (static_cast<int>(w.days.size()) != horizon_days) {
            throw ProviderUnavailable(fmt::format("forecast has {} days, wanted {}", w.days.size(), horizon_days));
        }
        w.validate();
        return w;
    } catch (const json::exception& e) {
        throw ProviderUnavailable(fmt::format("malformed forecast: {}", e.what()));
    } catch (const std::invalid_argument& e) {
        throw ProviderUnavailable(fmt::format("malformed forecast: {}", e.what()));
    }
}

PriceSeries HttpFeedProvider::get_prices(const std::string& crop, int days) {
    auto j = fetch_json(base_url_, fmt::format("/prices?crop={}&days={}", percent_encode(crop), days), api_key_,
                        timeout_s_);
    try {
        auto s = prices_from_json(j);
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw ProviderUnavailable(fmt::format("malformed prices: {}", e.what()));
    } catch (const std::invalid_argument& e) {
        throw ProviderUnavailable(fmt::format("malformed prices: {}", e.what()));
    }
}

} // namespace feeds

// ---------------------------------------------------------------------------

namespace gateway {

HttpUplink::HttpUplink(std::string base_url, double timeout_s) : base_url_(std::move(base_url)), timeout_s_(timeout_s) {}

AckMap HttpUplink::post(std::span<const SensorReading> batch) {
    const auto ep = split_url(base_url_);
    auto client = make_client(ep, timeout_s_);
    auto res = client.Post(ep.prefix + "/v1/ingest", to_ndjson(batch), "application/x-ndjson");
    if (!res) {
        throw UplinkUnavailable(fmt::format("ingest: {}", httplib::to_string(res.error())));
    }
    if (res->status != 200) {
        throw UplinkUnavailable(fmt::format("ingest: HTTP {}", res->status));
    }
    try {
        auto j = json::parse(res->body);
        AckMap acks;
        for (const auto& [node, seq] : j.at("acked").items()) {
            acks[node] = seq.get<std::uint64_t>();
        }
        return acks;
    } catch (const json::exception& e) {
        throw UplinkUnavailable(fmt::format("ingest: malformed acknowledgement: {}", e.what()));
    }
}

} // namespace gateway

} // namespace agri
