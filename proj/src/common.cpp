#include "agri/common.hpp"

#include <cctype>

#include <fmt/format.h>

#include "agri/errors.hpp"

namespace agri {

std::string_view language_code(Language l) {
    switch (l) {
    case Language::en: return "en";
    case Language::ur: return "ur";
    case Language::pa: return "pa";
    case Language::sd: return "sd";
    }
    return "en";
}

Language parse_language(std::string_view code) {
    if (code == "en") return Language::en;
    if (code == "ur") return Language::ur;
    if (code == "pa") return Language::pa;
    if (code == "sd") return Language::sd;
    throw UnsupportedLanguage(fmt::format("unsupported language '{}'", code));
}

bool uses_arabic_script(Language l) { return l != Language::en; }

std::string_view citation_kind_name(CitationKind k) {
    switch (k) {
    case CitationKind::reading: return "reading";
    case CitationKind::passage: return "passage";
    case CitationKind::forecast: return "forecast";
    case CitationKind::window: return "window";
    case CitationKind::market: return "market";
    }
    return "reading";
}

CitationKind parse_citation_kind(std::string_view name) {
    for (auto k : {CitationKind::reading, CitationKind::passage, CitationKind::forecast, CitationKind::window,
                   CitationKind::market}) {
        if (citation_kind_name(k) == name) {
            return k;
        }
    }
    throw std::invalid_argument(fmt::format("unknown citation kind '{}'", name));
}

char citation_tag(CitationKind k) {
    switch (k) {
    case CitationKind::reading: return 'R';
    case CitationKind::passage: return 'P';
    case CitationKind::forecast: return 'F';
    case CitationKind::window: return 'W';
    case CitationKind::market: return 'M';
    }
    return 'R';
}

std::optional<CitationKind> citation_kind_from_tag(char tag) {
    switch (tag) {
    case 'R': return CitationKind::reading;
    case 'P': return CitationKind::passage;
    case 'F': return CitationKind::forecast;
    case 'W': return CitationKind::window;
    case 'M': return CitationKind::market;
    default: return std::nullopt;
    }
}

std::string Citation::marker() const { return fmt::format("[{}:{}]", citation_tag(kind), id); }

nlohmann::json to_json(const Citation& c) {
    return {{"kind", std::string(citation_kind_name(c.kind))}, {"id", c.id}};
}

Citation citation_from_json(const nlohmann::json& j) {
    return {parse_citation_kind(j.at("kind").get<std::string>()), j.at("id").get<std::string>()};
}

std::string_view direction_name(Direction d) { return d == Direction::inbound ? "inbound" : "outbound"; }

std::string_view message_kind_name(MessageKind k) { return k == MessageKind::text ? "text" : "voice"; }

MessageKind parse_message_kind(std::string_view name) {
    if (name == "text") return MessageKind::text;
    if (name == "voice") return MessageKind::voice;
    throw std::invalid_argument(fmt::format("unknown message kind '{}'", name));
}

void validate_phone(std::string_view phone) {
    bool ok = phone.size() >= 8 && phone.size() <= 16 && phone[0] == '+' && phone[1] != '0';
    for (size_t i = 1; ok && i < phone.size(); ++i) {
        ok = std::isdigit(static_cast<unsigned char>(phone[i])) != 0;
    }
    if (!ok) {
        throw std::invalid_argument(fmt::format("'{}' is not an E.164 phone number", phone));
    }
}

nlohmann::json to_json(const FarmProfile& p) {
    nlohmann::json j = {{"farm_id", p.farm_id},
                        {"phone", p.phone},
                        {"language", std::string(language_code(p.language))},
                        {"crops", p.crops},
                        {"location", {{"lat", p.location.lat}, {"lon", p.location.lon}}},
                        {"summary_times", p.summary_times},
                        {"utc_offset_minutes", p.utc_offset_minutes},
                        {"created_at", p.created_at},
                        {"active", p.active}};
    if (p.growth_stage) {
        j["growth_stage"] = std::string(stage_name(*p.growth_stage));
    }
    return j;
}

FarmProfile profile_from_json(const nlohmann::json& j) {
    FarmProfile p;
    p.farm_id = j.value("farm_id", std::string{});
    p.phone = j.at("phone").get<std::string>();
    p.language = parse_language(j.at("language").get<std::string>());
    p.crops = j.at("crops").get<std::vector<std::string>>();
    p.location.lat = j.at("location").at("lat").get<double>();
    p.location.lon = j.at("location").at("lon").get<double>();
    p.summary_times = j.value("summary_times", std::vector<std::string>{});
    p.utc_offset_minutes = j.value("utc_offset_minutes", 0);
    p.created_at = j.value("created_at", Timestamp{0});
    p.active = j.value("active", false);
    if (j.contains("growth_stage")) {
        p.growth_stage = parse_stage(j["growth_stage"].get<std::string>());
    }
    return p;
}

nlohmann::json to_json(const ChatRecord& c) {
    nlohmann::json cites = nlohmann::json::array();
    for (const auto& ci : c.citations) {
        cites.push_back(to_json(ci));
    }
    return {{"farm_id", c.farm_id},
            {"direction", std::string(direction_name(c.direction))},
            {"ts", c.timestamp},
            {"body", c.body},
            {"language", std::string(language_code(c.language))},
            {"kind", std::string(message_kind_name(c.kind))},
            {"citations", cites}};
}

ChatRecord chat_from_json(const nlohmann::json& j) {
    ChatRecord c;
    c.farm_id = j.at("farm_id").get<std::string>();
    c.direction = j.at("direction").get<std::string>() == "inbound" ? Direction::inbound : Direction::outbound;
    c.timestamp = j.at("ts").get<Timestamp>();
    c.body = j.at("body").get<std::string>();
    c.language = parse_language(j.at("language").get<std::string>());
    c.kind = parse_message_kind(j.at("kind").get<std::string>());
    for (const auto& ci : j.value("citations", nlohmann::json::array())) {
        c.citations.push_back(citation_from_json(ci));
    }
    return c;
}

std::string_view severity_name(Severity s) { return s == Severity::warning ? "warning" : "critical"; }

std::string Alert::cooldown_key() const { return fmt::format("{}/{}", farm_id, metric_name(metric)); }

nlohmann::json to_json(const Alert& a) {
    nlohmann::json cites = nlohmann::json::array();
    for (const auto& ci : a.citations) {
        cites.push_back(to_json(ci));
    }
    return {{"farm_id", a.farm_id},
            {"metric", std::string(metric_name(a.metric))},
            {"observed", a.observed},
            {"band", {a.band.lo, a.band.hi}},
            {"severity", std::string(severity_name(a.severity))},
            {"recommendation", a.recommendation},
            {"text", a.text},
            {"language", std::string(language_code(a.language))},
            {"citations", cites},
            {"issued_at", a.issued_at},
            {"cooldown_key", a.cooldown_key()}};
}

Alert alert_from_json(const nlohmann::json& j) {
    Alert a;
    a.farm_id = j.at("farm_id").get<std::string>();
    a.metric = parse_metric(j.at("metric").get<std::string>());
    a.observed = j.at("observed").get<double>();
    a.band = {j.at("band").at(0).get<double>(), j.at("band").at(1).get<double>()};
    a.severity = j.at("severity").get<std::string>() == "critical" ? Severity::critical : Severity::warning;
    a.recommendation = j.at("recommendation").get<std::string>();
    a.text = j.at("text").get<std::string>();
    a.language = parse_language(j.at("language").get<std::string>());
    for (const auto& ci : j.at("citations")) {
        a.citations.push_back(citation_from_json(ci));
    }
    a.issued_at = j.at("issued_at").get<Timestamp>();
    return a;
}

} // namespace agri
