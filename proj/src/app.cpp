#include "agri/app.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>

#include <fmt/format.h>

#include "agri/errors.hpp"

namespace agri::app {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path default_data_dir() {
    if (const char* env = std::getenv("AGRI_DATA_DIR")) {
        return env;
    }
    return AGRI_DATA_DIR;
}

Timestamp unix_now() {
    using namespace std::chrono;
    return duration_cast<seconds>(system_clock::now().time_since_epoch()).count();
}

AppConfig AppConfig::from_json(const json& j) {
    AppConfig c;
    try {
        if (j.contains("data_dir")) {
            c.data_dir = j["data_dir"].get<std::string>();
        }
        if (j.contains("store_dir")) {
            c.store_dir = j["store_dir"].get<std::string>();
        }
        if (j.contains("kb_index")) {
            c.kb_index = j["kb_index"].get<std::string>();
        }
        if (j.contains("backend")) {
            const auto& b = j["backend"];
            c.backend_kind = b.value("kind", c.backend_kind);
            c.remote.endpoint = b.value("endpoint", std::string{});
            c.remote.model = b.value("model", std::string{});
            c.remote.api_key_env = b.value("api_key_env", std::string{});
            c.remote.timeout_s = b.value("timeout_s", c.remote.timeout_s);
        }
        if (j.contains("feeds")) {
            const auto& f = j["feeds"];
            c.feeds_kind = f.value("kind", c.feeds_kind);
            c.feeds_url = f.value("url", std::string{});
            c.feeds_key_env = f.value("api_key_env", std::string{});
            if (f.contains("as_of")) {
                c.feeds_as_of = f["as_of"].get<std::string>();
            }
        }
        if (j.contains("provider")) {
            c.provider_kind = j["provider"].value("kind", c.provider_kind);
        }
        c.workers = j.value("workers", c.workers);
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config: {}", e.what()));
    }
    if (c.backend_kind != "mock" && c.backend_kind != "remote") {
        throw ConfigError(fmt::format("config: unknown backend kind '{}'", c.backend_kind));
    }
    if (c.feeds_kind != "replay" && c.feeds_kind != "http" && c.feeds_kind != "none") {
        throw ConfigError(fmt::format("config: unknown feeds kind '{}'", c.feeds_kind));
    }
    if (c.provider_kind != "mock") {
        throw ConfigError(fmt::format("config: provider '{}' has no adapter; only 'mock' is built in", c.provider_kind));
    }
    return c;
}

AppConfig AppConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open config {}", path.string()));
    }
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("config {}: {}", path.string(), e.what()));
    }
}

std::unique_ptr<kb::KnowledgeBase> load_knowledge(const AppConfig& config) {
    if (config.kb_index) {
        return kb::KnowledgeBase::load(*config.kb_index);
    }
    auto kb = std::make_unique<kb::KnowledgeBase>();
    kb->ingest_all(kb::load_corpus(config.data_dir / "kb" / "corpus"));
    return kb;
}

Runtime::Runtime(AppConfig config) : config_(std::move(config)), stage_log_(config_.stage_log) {
    const auto& data = config_.data_dir;
    store_ = config_.store_dir ? std::make_unique<store::Store>(*config_.store_dir) : std::make_unique<store::Store>();
    bands_ = CropBandTable::load(data / "crop_bands.json");
    templates_ = llm::TemplateSet::load(data / "prompts");
    kb_ = load_knowledge(config_);

    if (config_.backend_kind == "remote") {
        raw_backend_ = std::make_unique<llm::RemoteBackend>(config_.remote);
        translator_ = std::make_unique<llm::BackendTranslator>(*raw_backend_);
    } else {
        raw_backend_ = std::make_unique<llm::MockBackend>(llm::MockBackend::load(data / "mock" / "rules.json"));
        translator_ = std::make_unique<llm::MockTranslator>();
    }
    backend_ = std::make_unique<llm::BoundedBackend>(*raw_backend_);

    rule_intent_ = std::make_unique<pipeline::RuleIntentParser>(
        pipeline::RuleIntentParser::load(data / "intent_rules.json"));
    intent_ = std::make_unique<pipeline::LlmIntentParser>(*backend_, templates_, *rule_intent_);

    if (config_.feeds_kind == "replay") {
        feeds_ = std::make_unique<feeds::ReplayProvider>(data / "feeds", config_.feeds_as_of);
    } else if (config_.feeds_kind == "http") {
        std::string key;
        if (!config_.feeds_key_env.empty()) {
            if (const char* k = std::getenv(config_.feeds_key_env.c_str())) {
                key = k;
            }
        }
        feeds_ = std::make_unique<feeds::HttpFeedProvider>(config_.feeds_url, key);
    }
    if (feeds_) {
        cached_feeds_ = std::make_unique<feeds::CachingProvider>(*feeds_, time_);
    }

    orchestrator_ = std::make_unique<pipeline::Orchestrator>(pipeline::OrchestratorDeps{
        .store = *store_,
        .feeds = cached_feeds_.get(),
        .retriever = kb_.get(),
        .backend = *backend_,
        .translator = *translator_,
        .templates = templates_,
        .intent = *intent_,
        .time = time_,
        .retry = config_.retry,
        .log = &stage_log_,
    });

    mock_provider_ = std::make_unique<chat::MockProvider>();
    chat_ = std::make_unique<chat::ChatService>(*store_, *mock_provider_, orchestrator_.get(), unix_now,
                                                config_.retry, &time_);
    alerts_ = std::make_unique<alerts::AlertMonitor>(*store_, bands_, cached_feeds_.get(),
                                                     alerts::AlertDeps{.store = *store_,
                                                                       .retriever = kb_.get(),
                                                                       .backend = backend_.get(),
                                                                       .translator = *translator_,
                                                                       .templates = &templates_});
    ingestor_ = std::make_unique<service::Ingestor>(*store_, alerts_.get(), chat_.get());
    if (config_.workers > 0) {
        chat_->start(config_.workers);
    }
}

Runtime::~Runtime() {
    if (chat_) {
        chat_->stop();
    }
}

service::ServiceContext Runtime::service_context(std::optional<fs::path> static_dir) {
    return service::ServiceContext{.store = *store_,
                                   .ingestor = *ingestor_,
                                   .chat = *chat_,
                                   .outbox = mock_provider_.get(),
                                   .clock = unix_now,
                                   .static_dir = std::move(static_dir)};
}

} // namespace agri::app
