#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "agri/pipeline.hpp"
#include "agri/text.hpp"

namespace agri::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view window_name(Window w) {
    switch (w) {
    case Window::latest: return "latest";
    case Window::last_24h: return "last_24h";
    case Window::last_7d: return "last_7d";
    }
    return "latest";
}

Window parse_window(std::string_view name) {
    if (name == "latest") return Window::latest;
    if (name == "last_24h") return Window::last_24h;
    if (name == "last_7d") return Window::last_7d;
    throw SchemaError(fmt::format("unknown window '{}'", name));
}

Timestamp window_seconds(Window w) {
    switch (w) {
    case Window::latest: return 0;
    case Window::last_24h: return kSecondsPerDay;
    case Window::last_7d: return 7 * kSecondsPerDay;
    }
    return 0;
}

void DataRequirement::validate() const {
    if (forecast_days < 0 || forecast_days > feeds::kMaxHorizonDays) {
        throw SchemaError(fmt::format("forecast_days {} outside [0, {}]", forecast_days, feeds::kMaxHorizonDays));
    }
    const bool has_kb = kb_query.has_value() && !text::trim(*kb_query).empty();
    if (metrics.empty() && forecast_days == 0 && !needs_market && !has_kb) {
        throw SchemaError("requirement requests no input");
    }
}

std::string DataRequirement::to_json() const {
    ordered_json j;
    j["v"] = kRequirementVersion;
    j["metrics"] = ordered_json::array();
    for (const auto& m : metrics) {
        ordered_json e;
        e["kind"] = metric_name(m.metric);
        e["window"] = window_name(m.window);
        j["metrics"].push_back(std::move(e));
    }
    j["forecast_days"] = forecast_days;
    j["needs_market"] = needs_market;
    if (kb_query) {
        j["kb_query"] = *kb_query;
    }
    j["reply_language"] = language_code(reply_language);
    return j.dump();
}

DataRequirement DataRequirement::from_json(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw SchemaError(fmt::format("requirement is not JSON: {}", e.what()));
    }
    if (!j.is_object()) {
        throw SchemaError("requirement must be an object");
    }
    static const std::vector<std::string> allowed{"v",         "metrics",       "forecast_days", "needs_market",
                                                  "kb_query",  "reply_language"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw SchemaError(fmt::format("unexpected field '{}'", key));
        }
    }
    auto require = [&](const char* key) -> const json& {
        if (!j.contains(key)) {
            throw SchemaError(fmt::format("missing field '{}'", key));
        }
        return j.at(key);
    };
    const auto& v = require("v");
    if (!v.is_number_integer() || v.get<int>() != kRequirementVersion) {
        throw SchemaError("unsupported requirement version");
    }
    DataRequirement r;
    const auto& metrics = require("metrics");
    if (!metrics.is_array()) {
        throw SchemaError("metrics must be an array");
    }
    for (const auto& m : metrics) {
        if (!m.is_object() || !m.contains("kind") || !m.contains("window") || !m.at("kind").is_string() ||
            !m.at("window").is_string() || m.size() != 2) {
            throw SchemaError("metric entries need exactly 'kind' and 'window' strings");
        }
        auto metric = try_parse_metric(m.at("kind").get<std::string>());
        if (!metric) {
            throw SchemaError(fmt::format("unknown metric '{}'", m.at("kind").get<std::string>()));
        }
        r.metrics.push_back({*metric, parse_window(m.at("window").get<std::string>())});
    }
    const auto& days = require("forecast_days");
    if (!days.is_number_integer()) {
        throw SchemaError("forecast_days must be an integer");
    }
    r.forecast_days = days.get<int>();
    const auto& market = require("needs_market");
    if (!market.is_boolean()) {
        throw SchemaError("needs_market must be a boolean");
    }
    r.needs_market = market.get<bool>();
    if (j.contains("kb_query")) {
        if (!j.at("kb_query").is_string()) {
            throw SchemaError("kb_query must be a string");
        }
        r.kb_query = j.at("kb_query").get<std::string>();
    }
    const auto& lang = require("reply_language");
    if (!lang.is_string()) {
        throw SchemaError("reply_language must be a string");
    }
    try {
        r.reply_language = parse_language(lang.get<std::string>());
    } catch (const UnsupportedLanguage& e) {
        throw SchemaError(e.what());
    }
    r.validate();
    return r;
}

// ---------------------------------------------------------------------------

RuleIntentParser::RuleIntentParser(std::vector<Rule> rules) : rules_(std::move(rules)) {}

RuleIntentParser RuleIntentParser::parse_table(std::string_view json_text) {
    std::vector<Rule> rules;
    try {
        auto j = json::parse(json_text);
        if (j.at("version").get<int>() != 1) {
            throw ConfigError("unsupported intent table version");
        }
        for (const auto& r : j.at("rules")) {
            Rule rule;
            rule.keywords = r.at("keywords").get<std::vector<std::string>>();
            for (auto& k : rule.keywords) {
                k = text::to_lower(k);
            }
            for (const auto& m : r.value("metrics", json::array())) {
                rule.metrics.push_back(
                    {parse_metric(m.at("kind").get<std::string>()), parse_window(m.at("window").get<std::string>())});
            }
            rule.forecast_days = r.value("forecast_days", 0);
            rule.needs_market = r.value("needs_market", false);
            rule.kb_query = r.value("kb_query", std::string{});
            if (rule.keywords.empty()) {
                throw ConfigError("intent rule without keywords");
            }
            rules.push_back(std::move(rule));
        }
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("intent table: {}", e.what()));
    } catch (const SchemaError& e) {
        throw ConfigError(fmt::format("intent table: {}", e.what()));
    }
    return RuleIntentParser(std::move(rules));
}

RuleIntentParser RuleIntentParser::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open intent table {}", path.string()));
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_table(ss.str());
}

DataRequirement RuleIntentParser::parse(std::string_view message_en) {
    const auto lowered = text::to_lower(text::trim(message_en));
    if (lowered.empty()) {
        throw UnparseableIntent("empty message");
    }
    // Keywords match against space-padded tokens so " ph " cannot hit "phosphorus".
    std::string padded = " ";
    for (const auto& t : text::tokenize(lowered)) {
        padded += t + " ";
    }
    DataRequirement req;
    std::vector<std::string> queries;
    for (const auto& rule : rules_) {
        const bool hit = std::any_of(rule.keywords.begin(), rule.keywords.end(),
                                     [&](const std::string& k) { return text::contains(padded, k); });
        if (!hit) {
            continue;
        }
        for (const auto& m : rule.metrics) {
            auto it = std::find_if(req.metrics.begin(), req.metrics.end(),
                                   [&](const MetricRequest& e) { return e.metric == m.metric; });
            if (it == req.metrics.end()) {
                req.metrics.push_back(m);
            } else if (m.window > it->window) {
                it->window = m.window;
            }
        }
        req.forecast_days = std::max(req.forecast_days, rule.forecast_days);
        req.needs_market = req.needs_market || rule.needs_market;
        if (!rule.kb_query.empty() && std::find(queries.begin(), queries.end(), rule.kb_query) == queries.end()) {
            queries.push_back(rule.kb_query);
        }
    }
    if (!queries.empty()) {
        std::string q;
        for (const auto& s : queries) {
            q += q.empty() ? s : " " + s;
        }
        req.kb_query = q;
    } else if (req.metrics.empty() && req.forecast_days == 0 && !req.needs_market) {
        auto words = text::content_words(lowered);
        if (words.empty()) {
            throw UnparseableIntent(fmt::format("no recognizable content in '{}'", message_en));
        }
        std::string q;
        for (const auto& w : words) {
            q += q.empty() ? w : " " + w;
        }
        req.kb_query = q;
    }
    req.validate();
    return req;
}

// ---------------------------------------------------------------------------

LlmIntentParser::LlmIntentParser(llm::Backend& backend, const llm::TemplateSet& templates, IntentParser& fallback)
    : backend_(backend), templates_(templates), fallback_(fallback) {}

DataRequirement LlmIntentParser::parse(std::string_view message_en) {
    if (text::trim(message_en).empty()) {
        throw UnparseableIntent("empty message");
    }
    auto request = templates_.render(llm::Stage::intent, {{"message", std::string(message_en)}});
    const auto raw = backend_.complete(request);
    auto open = raw.find('{');
    auto close = raw.rfind('}');
    if (open != std::string::npos && close != std::string::npos && close > open) {
        try {
            return DataRequirement::from_json(std::string_view(raw).substr(open, close - open + 1));
        } catch (const SchemaError&) {
        }
    }
    ++fallbacks_;
    return fallback_.parse(message_en);
}

} // namespace agri::pipeline
