#include "agri/prompt.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "agri/errors.hpp"
#include "agri/text.hpp"

namespace agri::llm {

namespace fs = std::filesystem;

namespace {

const std::string& lookup(const TemplateVars& vars, std::string_view name, std::string_view template_name) {
    auto it = vars.find(name);
    if (it == vars.end()) {
        throw TemplateError(fmt::format("{}: missing variable '{}'", template_name, name));
    }
    return it->second;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) {
        throw ConfigError(fmt::format("cannot open template {}", p.string()));
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

std::string render_template(std::string_view tmpl, const TemplateVars& vars, std::string_view template_name) {
    std::string out;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        out.append(tmpl.substr(pos, open - pos));
        auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) {
            throw TemplateError(fmt::format("{}: unterminated tag at offset {}", template_name, open));
        }
        auto tag = text::trim(tmpl.substr(open + 2, close - open - 2));
        if (tag.empty()) {
            throw TemplateError(fmt::format("{}: empty tag at offset {}", template_name, open));
        }
        if (tag[0] == '#' || tag[0] == '^') {
            const std::string name = text::trim(std::string_view(tag).substr(1));
            const auto end_tag = fmt::format("{{{{/{}}}}}", name);
            auto end = tmpl.find(end_tag, close + 2);
            if (end == std::string_view::npos) {
                throw TemplateError(fmt::format("{}: section '{}' is not closed", template_name, name));
            }
            const bool non_empty = !text::trim(lookup(vars, name, template_name)).empty();
            if (non_empty == (tag[0] == '#')) {
                out += render_template(tmpl.substr(close + 2, end - close - 2), vars, template_name);
            }
            pos = end + end_tag.size();
            continue;
        }
        if (tag[0] == '/') {
            throw TemplateError(fmt::format("{}: stray closing tag '{}'", template_name, tag));
        }
        out += lookup(vars, tag, template_name);
        pos = close + 2;
    }
    return out;
}

TemplateSet::StageTemplate TemplateSet::parse_stage_template(std::string_view raw, std::string_view name) {
    StageTemplate t;
    t.name = std::string(name);
    enum class Part { none, system, user } part = Part::none;
    for (const auto& line : text::split(raw, '\n')) {
        auto trimmed = text::trim(line);
        if (part == Part::none && text::starts_with(trimmed, "#")) {
            auto colon = trimmed.find(':');
            if (colon != std::string::npos && text::trim(trimmed.substr(1, colon - 1)) == "version") {
                t.version = std::stoi(text::trim(trimmed.substr(colon + 1)));
            }
            continue;
        }
        if (trimmed == "[system]") {
            part = Part::system;
            continue;
        }
        if (trimmed == "[user]") {
            part = Part::user;
            continue;
        }
        if (part == Part::system) {
            t.system += line + "\n";
        } else if (part == Part::user) {
            t.user += line + "\n";
        }
    }
    t.system = text::trim(t.system);
    t.user = text::trim(t.user);
    if (t.user.empty()) {
        throw ConfigError(fmt::format("template {} has no [user] section", name));
    }
    return t;
}

TemplateSet TemplateSet::load(const fs::path& dir) {
    TemplateSet set;
    set.persona_ = text::trim(read_file(dir / "persona.txt"));
    for (auto stage : {Stage::intent, Stage::synthesis, Stage::alert_assess, Stage::judge, Stage::summary}) {
        auto name = std::string(stage_name(stage));
        auto path = dir / (name + ".txt");
        if (fs::exists(path)) {
            set.stages_[stage] = parse_stage_template(read_file(path), name);
        }
    }
    return set;
}

void TemplateSet::set(Stage stage, StageTemplate t) { stages_[stage] = std::move(t); }

const TemplateSet::StageTemplate& TemplateSet::get(Stage stage) const {
    auto it = stages_.find(stage);
    if (it == stages_.end()) {
        throw TemplateError(fmt::format("no template for stage {}", stage_name(stage)));
    }
    return it->second;
}

bool uses_persona(Stage stage) {
    return stage == Stage::synthesis || stage == Stage::summary || stage == Stage::alert_assess;
}

ModelRequest TemplateSet::render(Stage stage, const TemplateVars& vars) const {
    const auto& t = get(stage);
    ModelRequest req;
    req.stage = stage;
    auto system = render_template(t.system, vars, t.name);
    if (uses_persona(stage)) {
        req.system_prompt = system.empty() ? persona_ : persona_ + "\n\n" + system;
    } else {
        req.system_prompt = std::move(system);
    }
    req.user_payload = render_template(t.user, vars, t.name);
    req.temperature = stage == Stage::judge || stage == Stage::intent ? 0.0 : 0.2;
    return req;
}

} // namespace agri::llm
