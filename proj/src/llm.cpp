#include "agri/llm.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "agri/errors.hpp"
#include "agri/text.hpp"

namespace agri::llm {

namespace {

constexpr std::array<std::string_view, 6> kStageNames = {"intent",    "synthesis", "alert_assess",
                                                         "judge",     "translate", "summary"};

std::string canonicalize(std::string_view payload) {
    std::string out;
    bool space = false;
    for (char c : text::to_lower(payload)) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = !out.empty();
            continue;
        }
        if (space) {
            out.push_back(' ');
            space = false;
        }
        out.push_back(c);
    }
    return out;
}

std::vector<std::string> block_lines(std::string_view payload, std::string_view tag) {
    std::vector<std::string> out;
    for (const auto& line : text::split(extract_block(payload, tag), '\n')) {
        auto t = text::trim(line);
        if (text::starts_with(t, "- ")) {
            t = t.substr(2);
        }
        if (!t.empty()) {
            out.push_back(t);
        }
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) {
            out += sep;
        }
        out += p;
    }
    return out;
}

// Passage lines look like "[P:doc#2] (Title §Section ¶2) text ...".
std::string passage_summary(const std::string& line) {
    auto close = line.find(']');
    if (line.empty() || line[0] != '[' || close == std::string::npos) {
        return {};
    }
    auto marker = line.substr(0, close + 1);
    auto rest = text::trim(std::string_view(line).substr(close + 1));
    if (!rest.empty() && rest[0] == '(') {
        auto paren = rest.find(") ");
        rest = paren == std::string::npos ? std::string{} : rest.substr(paren + 2);
    }
    auto first = text::lead_sentence(rest);
    if (first.empty()) {
        return {};
    }
    return first + " " + marker;
}

std::string expand(std::string_view response, std::string_view payload) {
    std::string out(response);
    auto replace_all = [&](std::string_view key, const std::string& value) {
        for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size())) {
            out.replace(pos, key.size(), value);
        }
    };
    if (text::contains(out, "{{facts}}")) {
        replace_all("{{facts}}", join(block_lines(payload, "facts"), " "));
    }
    if (text::contains(out, "{{passages}}")) {
        std::vector<std::string> parts;
        for (const auto& l : block_lines(payload, "passages")) {
            if (auto s = passage_summary(l); !s.empty()) {
                parts.push_back(s);
            }
        }
        replace_all("{{passages}}", join(parts, " "));
    }
    if (text::contains(out, "{{gaps}}")) {
        replace_all("{{gaps}}", join(block_lines(payload, "gaps"), " "));
    }
    if (text::contains(out, "{{question}}")) {
        replace_all("{{question}}", text::trim(extract_block(payload, "question")));
    }
    // Collapse the double spaces left by empty expansions.
    std::string collapsed;
    for (char c : out) {
        if (c == ' ' && !collapsed.empty() && collapsed.back() == ' ') {
            continue;
        }
        collapsed.push_back(c);
    }
    return text::trim(collapsed);
}

// Lowercase a-z then uppercase A-Z onto 52 distinct Arabic-block letters.
char32_t to_arabic(char c) {
    if (c >= 'a' && c <= 'z') {
        return 0x0621 + static_cast<char32_t>(c - 'a');
    }
    if (c >= 'A' && c <= 'J') {
        return 0x0641 + static_cast<char32_t>(c - 'A');
    }
    if (c >= 'K' && c <= 'Z') {
        return 0x0671 + static_cast<char32_t>(c - 'K');
    }
    return 0;
}

char from_arabic(char32_t cp) {
    if (cp >= 0x0621 && cp <= 0x063A) {
        return static_cast<char>('a' + (cp - 0x0621));
    }
    if (cp >= 0x0641 && cp <= 0x064A) {
        return static_cast<char>('A' + (cp - 0x0641));
    }
    if (cp >= 0x0671 && cp <= 0x0680) {
        return static_cast<char>('K' + (cp - 0x0671));
    }
    return 0;
}

std::string tag_for(Language l) { return fmt::format("⟪{}⟫", language_code(l)); }

} // namespace

std::string_view stage_name(Stage s) { return kStageNames[static_cast<std::size_t>(s)]; }

Stage parse_stage(std::string_view name) {
    for (std::size_t i = 0; i < kStageNames.size(); ++i) {
        if (kStageNames[i] == name) {
            return static_cast<Stage>(i);
        }
    }
    throw std::invalid_argument(fmt::format("unknown stage '{}'", name));
}

std::string extract_block(std::string_view payload, std::string_view tag) {
    const auto open = fmt::format("<{}>", tag);
    const auto close = fmt::format("</{}>", tag);
    auto b = payload.find(open);
    if (b == std::string_view::npos) {
        return {};
    }
    b += open.size();
    auto e = payload.find(close, b);
    if (e == std::string_view::npos) {
        return {};
    }
    return std::string(payload.substr(b, e - b));
}

MockBackend::MockBackend(std::vector<Rule> rules) : rules_(std::move(rules)) {
    for (auto& r : rules_) {
        for (auto& m : r.match) {
            m = canonicalize(m);
        }
    }
}

MockBackend MockBackend::parse(std::string_view json_text) {
    std::vector<Rule> rules;
    try {
        auto j = nlohmann::json::parse(json_text);
        if (j.at("version").get<int>() != 1) {
            throw ConfigError("mock rule table: unsupported version");
        }
        for (const auto& r : j.at("rules")) {
            Rule rule;
            rule.stage = parse_stage(r.at("stage").get<std::string>());
            if (r.contains("match")) {
                if (r["match"].is_array()) {
                    rule.match = r["match"].get<std::vector<std::string>>();
                } else if (auto m = r["match"].get<std::string>(); !m.empty()) {
                    rule.match.push_back(m);
                }
            }
            rule.response = r.at("response").get<std::string>();
            rule.block = r.value("block", std::string{});
            rules.push_back(std::move(rule));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("mock rule table: {}", e.what()));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(fmt::format("mock rule table: {}", e.what()));
    }
    return MockBackend(std::move(rules));
}

MockBackend MockBackend::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open mock rule table {}", path.string()));
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string MockBackend::complete(const ModelRequest& request) {
    const auto canon = canonicalize(request.user_payload);
    for (const auto& rule : rules_) {
        if (rule.stage != request.stage) {
            continue;
        }
        const auto scoped = rule.block.empty() ? std::string{} : canonicalize(extract_block(request.user_payload, rule.block));
        const auto& haystack = rule.block.empty() ? canon : scoped;
        bool all = true;
        for (const auto& m : rule.match) {
            if (!text::contains(haystack, m)) {
                all = false;
                break;
            }
        }
        if (all) {
            return expand(rule.response, request.user_payload);
        }
    }
    throw BackendError(404, fmt::format("mock: no rule for stage {}", stage_name(request.stage)));
}

BoundedBackend::BoundedBackend(Backend& inner, std::ptrdiff_t max_in_flight)
    : inner_(inner), slots_(max_in_flight) {}

std::string BoundedBackend::complete(const ModelRequest& request) {
    slots_.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{slots_};
    return inner_.complete(request);
}

std::string MockTranslator::translate(std::string_view input, Language src, Language dst) {
    if (src == dst) {
        return std::string(input);
    }
    std::string english;
    if (src == Language::en) {
        english = std::string(input);
    } else {
        const auto tag = tag_for(src);
        if (!text::starts_with(input, tag)) {
            return std::string(input);
        }
        for (char32_t cp : text::decode_utf8(input.substr(tag.size()))) {
            if (char c = from_arabic(cp); c != 0) {
                english.push_back(c);
            } else {
                text::append_utf8(english, cp);
            }
        }
    }
    if (dst == Language::en) {
        return english;
    }
    std::string out = tag_for(dst);
    for (char c : english) {
        if (char32_t cp = to_arabic(c); cp != 0) {
            text::append_utf8(out, cp);
        } else {
            out.push_back(c);
        }
    }
    return out;
}

std::string BackendTranslator::translate(std::string_view input, Language src, Language dst) {
    if (src == dst) {
        return std::string(input);
    }
    ModelRequest req;
    req.stage = Stage::translate;
    req.system_prompt = fmt::format(
        "Translate the user's text from {} to {}. Keep every number and every bracketed marker unchanged. "
        "Write Urdu, Punjabi (Shahmukhi) and Sindhi in Arabic script only. Reply with the translation only.",
        language_code(src), language_code(dst));
    req.user_payload = std::string(input);
    req.temperature = 0.0;
    return backend_.complete(req);
}

Language language_tag(std::string_view code) { return parse_language(code); }

} // namespace agri::llm
