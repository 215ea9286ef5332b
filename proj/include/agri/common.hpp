#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "agri/agronomy.hpp"
#include "agri/telemetry.hpp"
#include "agri/timeutil.hpp"

namespace agri {

/// Supported conversation languages. Urdu, Punjabi and Sindhi are written in
/// Arabic script (Shahmukhi for Punjabi).
enum class Language : std::uint8_t { en, ur, pa, sd };

[[nodiscard]] std::string_view language_code(Language l);
/// Throws agri::UnsupportedLanguage.
[[nodiscard]] Language parse_language(std::string_view code);
[[nodiscard]] bool uses_arabic_script(Language l);

struct Location {
    double lat = 0.0;
    double lon = 0.0;
};

enum class CitationKind : std::uint8_t { reading, passage, forecast, window, market };

[[nodiscard]] std::string_view citation_kind_name(CitationKind k);
[[nodiscard]] CitationKind parse_citation_kind(std::string_view name);
/// Single-letter tag used in inline markers: R, P, F, W, M.
[[nodiscard]] char citation_tag(CitationKind k);
[[nodiscard]] std::optional<CitationKind> citation_kind_from_tag(char tag);

/// Reference to a gathered input: a reading "node#seq", a passage
/// "doc#chunk", a forecast "issued_at@lat,lon", an aggregate window
/// "metric@from-to" or a market series "crop@date".
struct Citation {
    CitationKind kind = CitationKind::reading;
    std::string id;

    /// Inline marker form, e.g. "[R:n1#42]".
    [[nodiscard]] std::string marker() const;
    bool operator==(const Citation&) const = default;
    auto operator<=>(const Citation&) const = default;
};

[[nodiscard]] nlohmann::json to_json(const Citation& c);
[[nodiscard]] Citation citation_from_json(const nlohmann::json& j);

enum class Direction : std::uint8_t { inbound, outbound };
enum class MessageKind : std::uint8_t { text, voice };

[[nodiscard]] std::string_view direction_name(Direction d);
[[nodiscard]] std::string_view message_kind_name(MessageKind k);
[[nodiscard]] MessageKind parse_message_kind(std::string_view name);

struct FarmProfile {
    std::string farm_id;
    /// E.164, e.g. "+923001234567".
    std::string phone;
    Language language = Language::en;
    std::vector<std::string> crops;
    Location location;
    /// Local "HH:MM" times for the daily summary.
    std::vector<std::string> summary_times;
    std::optional<GrowthStage> growth_stage;
    int utc_offset_minutes = 0;
    Timestamp created_at = 0;
    bool active = false;

    [[nodiscard]] GrowthStage stage_or_default() const {
        return growth_stage.value_or(GrowthStage::vegetative);
    }
    [[nodiscard]] const std::string& primary_crop() const { return crops.front(); }
};

/// Throws std::invalid_argument for a malformed phone number.
void validate_phone(std::string_view phone);

[[nodiscard]] nlohmann::json to_json(const FarmProfile& p);
[[nodiscard]] FarmProfile profile_from_json(const nlohmann::json& j);

struct ChatRecord {
    std::string farm_id;
    Direction direction = Direction::inbound;
    Timestamp timestamp = 0;
    std::string body;
    Language language = Language::en;
    MessageKind kind = MessageKind::text;
    std::vector<Citation> citations;
};

[[nodiscard]] nlohmann::json to_json(const ChatRecord& c);
[[nodiscard]] ChatRecord chat_from_json(const nlohmann::json& j);

enum class Severity : std::uint8_t { warning, critical };

[[nodiscard]] std::string_view severity_name(Severity s);

/// Proactive warning raised from a reading outside its crop band.
struct Alert {
    std::string farm_id;
    Metric metric = Metric::moisture;
    double observed = 0.0;
    Range band{0.0, 0.0};
    Severity severity = Severity::warning;
    /// English recommendation as produced by the assessment stage.
    std::string recommendation;
    /// Delivered text in the farm's language.
    std::string text;
    Language language = Language::en;
    std::vector<Citation> citations;
    Timestamp issued_at = 0;

    /// Cooldown applies per (farm, metric).
    [[nodiscard]] std::string cooldown_key() const;
};

[[nodiscard]] nlohmann::json to_json(const Alert& a);
[[nodiscard]] Alert alert_from_json(const nlohmann::json& j);

} // namespace agri
