#pragma once

#include <filesystem>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "agri/common.hpp"

namespace agri::llm {

enum class Stage : std::uint8_t { intent, synthesis, alert_assess, judge, translate, summary };

[[nodiscard]] std::string_view stage_name(Stage s);
[[nodiscard]] Stage parse_stage(std::string_view name);

struct ModelRequest {
    Stage stage = Stage::synthesis;
    std::string system_prompt;
    std::string user_payload;
    int max_tokens = 512;
    double temperature = 0.2;
};

/// Text-generation backend. Implementations throw agri::BackendTimeout or
/// agri::BackendError; both are retryable.
class Backend {
  public:
    virtual ~Backend() = default;
    virtual std::string complete(const ModelRequest& request) = 0;
};

/// Deterministic backend driven by a rule table:
///
///   {"version": 1, "rules": [
///     {"stage": "intent", "match": "irrigat", "response": "..."},
///     {"stage": "synthesis", "match": ["ph", "acid"], "response": "{{facts}} ..."}]}
///
/// The first rule whose stage equals the request stage and whose match
/// strings all occur in the lowercased, whitespace-collapsed user payload
/// wins; an empty match always matches. A rule with "block": "question"
/// matches against that block of the payload only. Responses may embed
/// directives expanded from the payload:
///   {{facts}}     lines of the <facts> block, joined
///   {{gaps}}      lines of the <gaps> block, joined
///   {{passages}}  lead sentence of each <passages> entry with its marker
///   {{question}}  the <question> block
/// The output depends only on (stage, payload).
class MockBackend final : public Backend {
  public:
    struct Rule {
        Stage stage;
        std::vector<std::string> match;
        std::string response;
        /// Payload block the match strings are searched in; whole payload when empty.
        std::string block;
    };

    explicit MockBackend(std::vector<Rule> rules);
    static MockBackend parse(std::string_view json_text);
    static MockBackend load(const std::filesystem::path& path);

    std::string complete(const ModelRequest& request) override;

    [[nodiscard]] const std::vector<Rule>& rules() const { return rules_; }

  private:
    std::vector<Rule> rules_;
};

/// Extracts the text between <tag> and </tag>, or an empty string.
[[nodiscard]] std::string extract_block(std::string_view payload, std::string_view tag);

struct RemoteConfig {
    /// Base URL, e.g. "http://127.0.0.1:8080". Requests go to {endpoint}/v1/chat/completions.
    std::string endpoint;
    std::string model;
    /// Name of the environment variable holding the API key (may be empty).
    std::string api_key_env;
    double timeout_s = 30.0;
};

/// One JSON chat-completions round trip per call.
class RemoteBackend final : public Backend {
  public:
    explicit RemoteBackend(RemoteConfig config);
    std::string complete(const ModelRequest& request) override;

  private:
    RemoteConfig config_;
    std::string api_key_;
};

/// Caps concurrent calls into the wrapped backend.
class BoundedBackend final : public Backend {
  public:
    explicit BoundedBackend(Backend& inner, std::ptrdiff_t max_in_flight = 8);
    std::string complete(const ModelRequest& request) override;

  private:
    Backend& inner_;
    std::counting_semaphore<1024> slots_;
};

class Translator {
  public:
    virtual ~Translator() = default;
    /// src == dst is the identity.
    virtual std::string translate(std::string_view text, Language src, Language dst) = 0;
};

/// Reversible pseudo-translation: text bound for ur/pa/sd becomes
/// "⟪dst⟫" followed by the text with each ASCII letter mapped onto a distinct
/// Arabic-block letter; translating back strips the tag and inverts the map.
/// Text without a tag passes through unchanged.
class MockTranslator final : public Translator {
  public:
    std::string translate(std::string_view text, Language src, Language dst) override;
};

/// Translation through a backend's translate stage.
class BackendTranslator final : public Translator {
  public:
    explicit BackendTranslator(Backend& backend) : backend_(backend) {}
    std::string translate(std::string_view text, Language src, Language dst) override;

  private:
    Backend& backend_;
};

/// Parses a language code, accepting only the supported set. Throws agri::UnsupportedLanguage.
[[nodiscard]] Language language_tag(std::string_view code);

} // namespace agri::llm
