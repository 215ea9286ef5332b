#include "agri/datastore.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "agri/errors.hpp"
#include "agri/stats.hpp"

namespace agri::store {

namespace fs = std::filesystem;

namespace {

bool reading_less(const SensorReading& a, const SensorReading& b) {
    return std::tie(a.timestamp, a.node_id, a.seq) < std::tie(b.timestamp, b.node_id, b.seq);
}

template <typename F>
void for_each_line(const fs::path& file, F&& fn) {
    std::ifstream in(file);
    if (!in) {
        return;
    }
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            // A torn final line from a crash mid-write is skipped.
            continue;
        }
        fn(j);
    }
}

std::uint64_t farm_number(const std::string& farm_id) {
    if (farm_id.rfind("farm-", 0) != 0) {
        return 0;
    }
    try {
        return std::stoull(farm_id.substr(5));
    } catch (const std::exception&) {
        return 0;
    }
}

} // namespace

double aggregate(std::span<const Sample> series, AggOp op) {
    if (series.empty()) {
        throw InsufficientData("aggregate of empty series");
    }
    switch (op) {
    case AggOp::mean: {
        double sum = 0.0;
        for (const auto& s : series) {
            sum += s.value;
        }
        return sum / static_cast<double>(series.size());
    }
    case AggOp::min:
        return std::min_element(series.begin(), series.end(),
                                [](const Sample& a, const Sample& b) { return a.value < b.value; })
            ->value;
    case AggOp::max:
        return std::max_element(series.begin(), series.end(),
                                [](const Sample& a, const Sample& b) { return a.value < b.value; })
            ->value;
    }
    throw std::invalid_argument("unknown aggregate");
}

std::string_view trend_flag_name(TrendFlag f) {
    switch (f) {
    case TrendFlag::rising: return "rising";
    case TrendFlag::falling: return "falling";
    case TrendFlag::stable: return "stable";
    }
    return "stable";
}

double slope_threshold(Metric m) {
    switch (m) {
    case Metric::ec: return 50.0;
    case Metric::ph: return 0.05;
    case Metric::moisture: return 2.0;
    case Metric::temperature: return 1.0;
    case Metric::nitrogen:
    case Metric::phosphorus:
    case Metric::potassium: return 20.0;
    }
    return 0.0;
}

nlohmann::json to_json(const TrendReport& t) {
    return {{"metric", std::string(metric_name(t.metric))},
            {"from", t.from},
            {"to", t.to},
            {"slope_per_day", t.slope},
            {"intercept", t.intercept},
            {"points", t.points},
            {"flag", std::string(trend_flag_name(t.flag))}};
}

Store::Store() = default;

Store::Store(const fs::path& dir) : dir_(dir) {
    fs::create_directories(dir);
    auto manifest = dir / "MANIFEST.json";
    if (fs::exists(manifest)) {
        std::ifstream in(manifest);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(fmt::format("store manifest unreadable: {}", e.what()));
        }
        if (j.value("format", "") != "agri-store" || j.value("version", 0) != kStoreFormatVersion) {
            throw ConfigError(fmt::format("{} is not a version {} store", dir.string(), kStoreFormatVersion));
        }
    } else {
        std::ofstream out(manifest);
        out << nlohmann::json{{"format", "agri-store"}, {"version", kStoreFormatVersion}}.dump() << '\n';
    }
    replay();
    auto open = [&](std::ofstream& f, const char* name) {
        f.open(dir / name, std::ios::app);
        if (!f) {
            throw ConfigError(fmt::format("cannot open {} for append", (dir / name).string()));
        }
    };
    open(farms_log_, "farms.jsonl");
    open(nodes_log_, "nodes.jsonl");
    open(readings_log_, "readings.jsonl");
    open(chat_log_, "chat.jsonl");
    open(alerts_log_, "alerts.jsonl");
}

Store::~Store() = default;

void Store::replay() {
    const auto& dir = *dir_;
    for_each_line(dir / "farms.jsonl", [&](const nlohmann::json& j) {
        auto p = profile_from_json(j);
        auto& fd = farms_[p.farm_id];
        if (!fd.profile.phone.empty()) {
            phone_index_.erase(fd.profile.phone);
        }
        phone_index_[p.phone] = p.farm_id;
        next_farm_ = std::max(next_farm_, farm_number(p.farm_id) + 1);
        fd.profile = std::move(p);
    });
    for_each_line(dir / "nodes.jsonl", [&](const nlohmann::json& j) {
        node_farm_[j.at("node_id").get<std::string>()] = j.at("farm_id").get<std::string>();
    });
    for_each_line(dir / "readings.jsonl", [&](const nlohmann::json& j) {
        auto farm_id = j.at("farm_id").get<std::string>();
        auto r = reading_from_json(j.at("reading"));
        auto it = farms_.find(farm_id);
        if (it == farms_.end() || by_id_.count({r.node_id, r.seq}) != 0) {
            return;
        }
        insert_reading(it->second, r);
    });
    for_each_line(dir / "chat.jsonl", [&](const nlohmann::json& j) {
        auto c = chat_from_json(j);
        if (auto it = farms_.find(c.farm_id); it != farms_.end()) {
            it->second.chat.push_back(std::move(c));
        }
    });
    for_each_line(dir / "alerts.jsonl", [&](const nlohmann::json& j) {
        auto a = alert_from_json(j);
        if (auto it = farms_.find(a.farm_id); it != farms_.end()) {
            it->second.alerts.push_back(std::move(a));
        }
    });
}

void Store::write(std::ofstream& log, const nlohmann::json& record) {
    if (!dir_) {
        return;
    }
    log << record.dump() << '\n';
    log.flush();
    if (!log) {
        throw DatastoreUnavailable("store write failed");
    }
}

Store::FarmData& Store::require_farm(const std::string& farm_id) {
    auto it = farms_.find(farm_id);
    if (it == farms_.end()) {
        throw UnknownFarm(fmt::format("unknown farm '{}'", farm_id));
    }
    return it->second;
}

const Store::FarmData& Store::require_farm(const std::string& farm_id) const {
    auto it = farms_.find(farm_id);
    if (it == farms_.end()) {
        throw UnknownFarm(fmt::format("unknown farm '{}'", farm_id));
    }
    return it->second;
}

FarmProfile Store::add_farm(FarmProfile profile) {
    validate_phone(profile.phone);
    if (profile.crops.empty()) {
        throw std::invalid_argument("a farm needs at least one crop");
    }
    for (const auto& t : profile.summary_times) {
        (void)parse_time_of_day(t);
    }
    std::unique_lock lock(mu_);
    if (phone_index_.count(profile.phone) != 0) {
        throw DuplicatePhone(fmt::format("phone {} is already registered", profile.phone));
    }
    if (profile.farm_id.empty()) {
        profile.farm_id = fmt::format("farm-{}", next_farm_++);
    } else if (farms_.count(profile.farm_id) != 0) {
        throw std::invalid_argument(fmt::format("farm id '{}' already exists", profile.farm_id));
    } else {
        next_farm_ = std::max(next_farm_, farm_number(profile.farm_id) + 1);
    }
    write(farms_log_, to_json(profile));
    phone_index_[profile.phone] = profile.farm_id;
    farms_[profile.farm_id].profile = profile;
    return profile;
}

void Store::update_farm(const FarmProfile& profile) {
    std::unique_lock lock(mu_);
    auto& fd = require_farm(profile.farm_id);
    if (profile.phone != fd.profile.phone) {
        validate_phone(profile.phone);
        if (phone_index_.count(profile.phone) != 0) {
            throw DuplicatePhone(fmt::format("phone {} is already registered", profile.phone));
        }
        phone_index_.erase(fd.profile.phone);
        phone_index_[profile.phone] = profile.farm_id;
    }
    write(farms_log_, to_json(profile));
    fd.profile = profile;
}

std::optional<FarmProfile> Store::farm(const std::string& farm_id) const {
    std::shared_lock lock(mu_);
    auto it = farms_.find(farm_id);
    if (it == farms_.end()) {
        return std::nullopt;
    }
    return it->second.profile;
}

std::optional<FarmProfile> Store::farm_by_phone(const std::string& phone) const {
    std::shared_lock lock(mu_);
    auto it = phone_index_.find(phone);
    if (it == phone_index_.end()) {
        return std::nullopt;
    }
    return farms_.at(it->second).profile;
}

std::vector<FarmProfile> Store::farms() const {
    std::shared_lock lock(mu_);
    std::vector<FarmProfile> out;
    for (const auto& [id, fd] : farms_) {
        out.push_back(fd.profile);
    }
    return out;
}

void Store::attach_node(const std::string& node_id, const std::string& farm_id) {
    std::unique_lock lock(mu_);
    require_farm(farm_id);
    write(nodes_log_, {{"node_id", node_id}, {"farm_id", farm_id}});
    node_farm_[node_id] = farm_id;
}

std::optional<std::string> Store::farm_for_node(const std::string& node_id) const {
    std::shared_lock lock(mu_);
    auto it = node_farm_.find(node_id);
    if (it == node_farm_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void Store::insert_reading(FarmData& farm, const SensorReading& reading) {
    auto pos = std::upper_bound(farm.readings.begin(), farm.readings.end(), reading, reading_less);
    farm.readings.insert(pos, reading);
    by_id_.emplace(std::make_pair(reading.node_id, reading.seq), reading);
}

AppendResult Store::append_reading(const std::string& farm_id, const SensorReading& reading) {
    std::unique_lock lock(mu_);
    auto& fd = require_farm(farm_id);
    if (by_id_.count({reading.node_id, reading.seq}) != 0) {
        return AppendResult::duplicate_ignored;
    }
    write(readings_log_, {{"farm_id", farm_id}, {"reading", to_json(reading)}});
    insert_reading(fd, reading);
    return AppendResult::stored;
}

std::optional<SensorReading> Store::reading(const std::string& node_id, std::uint64_t seq) const {
    std::shared_lock lock(mu_);
    auto it = by_id_.find({node_id, seq});
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t Store::reading_count(const std::string& farm_id) const {
    std::shared_lock lock(mu_);
    return require_farm(farm_id).readings.size();
}

std::vector<SensorReading> Store::readings(const std::string& farm_id) const {
    std::shared_lock lock(mu_);
    return require_farm(farm_id).readings;
}

std::optional<Sample> Store::latest(const std::string& farm_id, Metric metric) const {
    std::shared_lock lock(mu_);
    auto it = farms_.find(farm_id);
    if (it == farms_.end() || it->second.readings.empty()) {
        return std::nullopt;
    }
    const auto& r = it->second.readings.back();
    return Sample{r.timestamp, r.value(metric), r.node_id, r.seq};
}

std::vector<Sample> Store::window(const std::string& farm_id, Metric metric, Timestamp from, Timestamp to) const {
    std::shared_lock lock(mu_);
    const auto& readings = require_farm(farm_id).readings;
    auto lo = std::lower_bound(readings.begin(), readings.end(), from,
                               [](const SensorReading& r, Timestamp t) { return r.timestamp < t; });
    std::vector<Sample> out;
    for (auto it = lo; it != readings.end() && it->timestamp < to; ++it) {
        out.push_back({it->timestamp, it->value(metric), it->node_id, it->seq});
    }
    return out;
}

TrendReport Store::detect_trend(const std::string& farm_id, Metric metric, double window_days,
                                std::optional<Timestamp> until) const {
    if (!(window_days > 0.0)) {
        throw std::invalid_argument("trend window must be positive");
    }
    Timestamp end = 0;
    if (until) {
        end = *until;
    } else {
        auto last = latest(farm_id, metric);
        if (!last) {
            // Distinguish an unknown farm from an empty one.
            (void)reading_count(farm_id);
            throw InsufficientData("no readings for trend");
        }
        end = last->ts;
    }
    const auto span_s = static_cast<Timestamp>(std::llround(window_days * static_cast<double>(kSecondsPerDay)));
    const Timestamp begin = end - span_s;
    auto series = window(farm_id, metric, begin, end + 1);
    if (series.size() < 2) {
        throw InsufficientData(fmt::format("trend needs at least two points, found {}", series.size()));
    }
    std::vector<double> x;
    std::vector<double> y;
    x.reserve(series.size());
    y.reserve(series.size());
    for (const auto& s : series) {
        x.push_back(static_cast<double>(s.ts - begin) / static_cast<double>(kSecondsPerDay));
        y.push_back(s.value);
    }
    auto fit = stats::ols(x, y);
    TrendReport report;
    report.metric = metric;
    report.from = begin;
    report.to = end;
    report.slope = fit.slope;
    report.intercept = fit.intercept;
    report.points = series.size();
    const double threshold = slope_threshold(metric);
    if (std::abs(fit.slope) <= threshold) {
        report.flag = TrendFlag::stable;
    } else {
        report.flag = fit.slope > 0 ? TrendFlag::rising : TrendFlag::falling;
    }
    return report;
}

void Store::append_chat(ChatRecord record) {
    std::unique_lock lock(mu_);
    auto& fd = require_farm(record.farm_id);
    if (!fd.chat.empty() && record.timestamp < fd.chat.back().timestamp) {
        record.timestamp = fd.chat.back().timestamp;
    }
    write(chat_log_, to_json(record));
    fd.chat.push_back(std::move(record));
}

std::vector<ChatRecord> Store::recent_chat(const std::string& farm_id, Timestamp now, double days) const {
    std::shared_lock lock(mu_);
    const auto& chat = require_farm(farm_id).chat;
    const auto cutoff = now - static_cast<Timestamp>(std::llround(days * static_cast<double>(kSecondsPerDay)));
    std::vector<ChatRecord> out;
    for (const auto& c : chat) {
        if (c.timestamp >= cutoff && c.timestamp <= now) {
            out.push_back(c);
        }
    }
    return out;
}

std::vector<ChatRecord> Store::chat_history(const std::string& farm_id) const {
    std::shared_lock lock(mu_);
    return require_farm(farm_id).chat;
}

void Store::append_alert(const Alert& alert) {
    std::unique_lock lock(mu_);
    auto& fd = require_farm(alert.farm_id);
    write(alerts_log_, to_json(alert));
    fd.alerts.push_back(alert);
}

std::vector<Alert> Store::alerts(const std::string& farm_id) const {
    std::shared_lock lock(mu_);
    return require_farm(farm_id).alerts;
}

std::optional<Alert> Store::last_alert(const std::string& farm_id, Metric metric) const {
    std::shared_lock lock(mu_);
    const auto& alerts = require_farm(farm_id).alerts;
    for (auto it = alerts.rbegin(); it != alerts.rend(); ++it) {
        if (it->metric == metric) {
            return *it;
        }
    }
    return std::nullopt;
}

} // namespace agri::store
