#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "agri/common.hpp"

namespace agri::store {

/// One metric value of one stored reading.
struct Sample {
    Timestamp ts = 0;
    double value = 0.0;
    std::string node_id;
    std::uint64_t seq = 0;

    bool operator==(const Sample&) const = default;
};

enum class AppendResult : std::uint8_t { stored, duplicate_ignored };

enum class AggOp : std::uint8_t { mean, min, max };

/// Throws agri::InsufficientData on an empty series.
[[nodiscard]] double aggregate(std::span<const Sample> series, AggOp op);

enum class TrendFlag : std::uint8_t { rising, falling, stable };

[[nodiscard]] std::string_view trend_flag_name(TrendFlag f);

struct TrendReport {
    Metric metric = Metric::moisture;
    Timestamp from = 0;
    Timestamp to = 0;
    /// Units per day.
    double slope = 0.0;
    double intercept = 0.0;
    std::size_t points = 0;
    TrendFlag flag = TrendFlag::stable;
};

/// |slope| at or below which a series is reported stable, per metric, in units/day.
[[nodiscard]] double slope_threshold(Metric m);

[[nodiscard]] nlohmann::json to_json(const TrendReport& t);

/// Embedded store for farm profiles, readings, chat logs and alerts.
///
/// On-disk layout (format version 1), one directory:
///   MANIFEST.json     {"format": "agri-store", "version": 1}
///   farms.jsonl       full profile records; the last record per farm_id wins
///   nodes.jsonl       {"node_id", "farm_id"} attachments
///   readings.jsonl    {"farm_id", "reading": <wire record>}
///   chat.jsonl        chat records
///   alerts.jsonl      alert records
/// Every file is an append-only log replayed on open. Writes are flushed
/// before the call returns.
///
/// Readers run concurrently; writers are serialized.
class Store {
  public:
    /// In-memory store.
    Store();
    /// Durable store rooted at `dir` (created if missing).
    explicit Store(const std::filesystem::path& dir);
    ~Store();

    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    /// Registers a profile. An empty farm_id is assigned ("farm-N").
    /// Throws agri::DuplicatePhone, std::invalid_argument for a bad phone or empty crop list.
    FarmProfile add_farm(FarmProfile profile);
    /// Replaces an existing profile (same farm_id). Throws agri::UnknownFarm.
    void update_farm(const FarmProfile& profile);
    [[nodiscard]] std::optional<FarmProfile> farm(const std::string& farm_id) const;
    [[nodiscard]] std::optional<FarmProfile> farm_by_phone(const std::string& phone) const;
    [[nodiscard]] std::vector<FarmProfile> farms() const;

    void attach_node(const std::string& node_id, const std::string& farm_id);
    [[nodiscard]] std::optional<std::string> farm_for_node(const std::string& node_id) const;

    /// Idempotent on (node_id, seq). Throws agri::UnknownFarm.
    AppendResult append_reading(const std::string& farm_id, const SensorReading& reading);
    [[nodiscard]] std::optional<SensorReading> reading(const std::string& node_id, std::uint64_t seq) const;
    [[nodiscard]] std::size_t reading_count(const std::string& farm_id) const;
    /// All readings of a farm ordered by (timestamp, node_id, seq).
    [[nodiscard]] std::vector<SensorReading> readings(const std::string& farm_id) const;

    /// Value with the greatest timestamp (ties: greatest node_id, then seq).
    [[nodiscard]] std::optional<Sample> latest(const std::string& farm_id, Metric metric) const;
    /// Samples with from <= ts < to, oldest first.
    [[nodiscard]] std::vector<Sample> window(const std::string& farm_id, Metric metric, Timestamp from,
                                             Timestamp to) const;
    /// OLS trend over [until - days, until]. `until` defaults to the farm's
    /// newest reading. Throws agri::InsufficientData with fewer than two points.
    [[nodiscard]] TrendReport detect_trend(const std::string& farm_id, Metric metric, double window_days,
                                           std::optional<Timestamp> until = std::nullopt) const;

    /// Timestamps are kept non-decreasing per farm: a record older than the
    /// farm's last chat record is stamped with that record's time.
    void append_chat(ChatRecord record);
    /// Records with ts >= now - days, oldest first.
    [[nodiscard]] std::vector<ChatRecord> recent_chat(const std::string& farm_id, Timestamp now,
                                                      double days = 7.0) const;
    [[nodiscard]] std::vector<ChatRecord> chat_history(const std::string& farm_id) const;

    void append_alert(const Alert& alert);
    [[nodiscard]] std::vector<Alert> alerts(const std::string& farm_id) const;
    [[nodiscard]] std::optional<Alert> last_alert(const std::string& farm_id, Metric metric) const;

    [[nodiscard]] const std::optional<std::filesystem::path>& directory() const { return dir_; }

  private:
    struct FarmData {
        FarmProfile profile;
        std::vector<SensorReading> readings;
        std::vector<ChatRecord> chat;
        std::vector<Alert> alerts;
    };

    void replay();
    void write(std::ofstream& log, const nlohmann::json& record);
    FarmData& require_farm(const std::string& farm_id);
    const FarmData& require_farm(const std::string& farm_id) const;
    void insert_reading(FarmData& farm, const SensorReading& reading);

    mutable std::shared_mutex mu_;
    std::optional<std::filesystem::path> dir_;
    std::ofstream farms_log_;
    std::ofstream nodes_log_;
    std::ofstream readings_log_;
    std::ofstream chat_log_;
    std::ofstream alerts_log_;

    std::map<std::string, FarmData> farms_;
    std::map<std::string, std::string> phone_index_;
    std::map<std::string, std::string> node_farm_;
    std::map<std::pair<std::string, std::uint64_t>, SensorReading> by_id_;
    std::uint64_t next_farm_ = 1;
};

inline constexpr int kStoreFormatVersion = 1;

} // namespace agri::store
