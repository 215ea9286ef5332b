#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include "agri/agronomy.hpp"
#include "agri/alerts.hpp"
#include "agri/chat.hpp"
#include "agri/datastore.hpp"
#include "agri/feeds.hpp"
#include "agri/knowledge.hpp"
#include "agri/llm.hpp"
#include "agri/orchestrator.hpp"
#include "agri/pipeline.hpp"
#include "agri/prompt.hpp"
#include "agri/service.hpp"

namespace agri::app {

/// Directory holding crop_bands.json, intent_rules.json, prompts/, mock/,
/// kb/ and feeds/. Defaults to the source tree's data/.
[[nodiscard]] std::filesystem::path default_data_dir();

/// Runtime configuration. JSON form (every key optional):
///   {"data_dir": "...", "store_dir": "...",
///    "backend": {"kind": "mock" | "remote", "endpoint": "...", "model": "...",
///                "api_key_env": "AGRI_LLM_KEY", "timeout_s": 30},
///    "feeds": {"kind": "replay" | "http" | "none", "url": "...", "api_key_env": "...", "as_of": "2025-06-10"},
///    "provider": {"kind": "mock"},
///    "workers": 2, "kb_index": "path/to/index.json"}
struct AppConfig {
    std::filesystem::path data_dir = default_data_dir();
    std::optional<std::filesystem::path> store_dir;
    std::string backend_kind = "mock";
    llm::RemoteConfig remote;
    std::string feeds_kind = "replay";
    std::string feeds_url;
    std::string feeds_key_env;
    std::optional<std::string> feeds_as_of;
    std::string provider_kind = "mock";
    std::size_t workers = 2;
    std::optional<std::filesystem::path> kb_index;
    pipeline::RetryPolicy retry{};
    std::ostream* stage_log = nullptr;

    /// Throws agri::ConfigError.
    static AppConfig from_json(const nlohmann::json& j);
    static AppConfig load(const std::filesystem::path& path);
};

/// Loads every corpus document under data/kb/corpus into a knowledge base,
/// or reads a saved index when one is configured.
[[nodiscard]] std::unique_ptr<kb::KnowledgeBase> load_knowledge(const AppConfig& config);

/// The assembled system: store, feeds, knowledge base, model backend,
/// orchestrator, alerting, chat front end and ingestion.
class Runtime {
  public:
    explicit Runtime(AppConfig config);
    ~Runtime();

    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    [[nodiscard]] const AppConfig& config() const { return config_; }
    [[nodiscard]] store::Store& store() { return *store_; }
    [[nodiscard]] const CropBandTable& bands() const { return bands_; }
    [[nodiscard]] const llm::TemplateSet& templates() const { return templates_; }
    [[nodiscard]] kb::KnowledgeBase& knowledge() { return *kb_; }
    [[nodiscard]] llm::Backend& backend() { return *backend_; }
    [[nodiscard]] llm::Translator& translator() { return *translator_; }
    [[nodiscard]] pipeline::IntentParser& intent() { return *intent_; }
    [[nodiscard]] feeds::FeedProvider* feeds() { return cached_feeds_.get(); }
    [[nodiscard]] pipeline::StageLog& stage_log() { return stage_log_; }
    [[nodiscard]] pipeline::Orchestrator& orchestrator() { return *orchestrator_; }
    [[nodiscard]] chat::MockProvider* mock_provider() { return mock_provider_.get(); }
    [[nodiscard]] chat::ChatService& chat() { return *chat_; }
    [[nodiscard]] alerts::AlertMonitor& alerts() { return *alerts_; }
    [[nodiscard]] service::Ingestor& ingestor() { return *ingestor_; }
    [[nodiscard]] TimeSource& time() { return time_; }

    /// Context for service::ApiServer.
    [[nodiscard]] service::ServiceContext service_context(std::optional<std::filesystem::path> static_dir = {});

  private:
    AppConfig config_;
    RealTimeSource time_;
    std::unique_ptr<store::Store> store_;
    CropBandTable bands_;
    llm::TemplateSet templates_;
    std::unique_ptr<kb::KnowledgeBase> kb_;
    std::unique_ptr<llm::Backend> raw_backend_;
    std::unique_ptr<llm::Backend> backend_;
    std::unique_ptr<llm::Translator> translator_;
    std::unique_ptr<pipeline::RuleIntentParser> rule_intent_;
    std::unique_ptr<pipeline::IntentParser> intent_;
    std::unique_ptr<feeds::FeedProvider> feeds_;
    std::unique_ptr<feeds::FeedProvider> cached_feeds_;
    pipeline::StageLog stage_log_;
    std::unique_ptr<pipeline::Orchestrator> orchestrator_;
    std::unique_ptr<chat::MockProvider> mock_provider_;
    std::unique_ptr<chat::ChatService> chat_;
    std::unique_ptr<alerts::AlertMonitor> alerts_;
    std::unique_ptr<service::Ingestor> ingestor_;
};

/// Wall-clock Unix seconds.
[[nodiscard]] Timestamp unix_now();

} // namespace agri::app
