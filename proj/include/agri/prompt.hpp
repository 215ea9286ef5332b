#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "agri/llm.hpp"

namespace agri::llm {

using TemplateVars = std::map<std::string, std::string, std::less<>>;

/// Renders a template with {{name}} placeholders and sections:
///   {{#name}}...{{/name}}  rendered when `name` is non-empty
///   {{^name}}...{{/name}}  rendered when `name` is empty
/// Every referenced name must be present in `vars`; otherwise
/// agri::TemplateError names the missing placeholder.
[[nodiscard]] std::string render_template(std::string_view tmpl, const TemplateVars& vars,
                                          std::string_view template_name = "template");

/// Prompt templates, one text file per stage plus the shared persona:
///
///   # template: synthesis
///   # version: 1
///   [system]
///   ...
///   [user]
///   ...
///
/// persona.txt holds the advisor persona prepended to the system prompt of
/// the synthesis, summary and alert_assess stages.
class TemplateSet {
  public:
    struct StageTemplate {
        std::string name;
        int version = 1;
        std::string system;
        std::string user;
    };

    static TemplateSet load(const std::filesystem::path& dir);
    static StageTemplate parse_stage_template(std::string_view raw, std::string_view name);

    void set(Stage stage, StageTemplate t);
    void set_persona(std::string persona) { persona_ = std::move(persona); }

    [[nodiscard]] const std::string& persona() const { return persona_; }
    [[nodiscard]] const StageTemplate& get(Stage stage) const;

    /// Fills the stage template. Throws agri::TemplateError for an unknown
    /// stage template or a missing variable.
    [[nodiscard]] ModelRequest render(Stage stage, const TemplateVars& vars) const;

  private:
    std::string persona_;
    std::map<Stage, StageTemplate> stages_;
};

[[nodiscard]] bool uses_persona(Stage stage);

} // namespace agri::llm
