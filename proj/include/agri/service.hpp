#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "agri/alerts.hpp"
#include "agri/chat.hpp"
#include "agri/datastore.hpp"
#include "agri/gateway.hpp"

namespace httplib {
class Server;
}

namespace agri::service {

struct IngestResult {
    /// Highest seq per node that the gateway may drop from its buffer.
    gateway::AckMap acked;
    std::size_t stored = 0;
    std::size_t duplicates = 0;
    /// Out of range or from an unattached node. Still acknowledged: a
    /// reading that can never be stored must not block the gateway buffer.
    std::size_t rejected = 0;
    std::vector<Alert> alerts;
};

[[nodiscard]] nlohmann::json to_json(const IngestResult& r);

/// Stores uplinked readings, runs alert assessment on new ones and queues
/// any alert for delivery.
class Ingestor {
  public:
    Ingestor(store::Store& store, alerts::AlertMonitor* monitor, chat::ChatService* chat)
        : store_(store), monitor_(monitor), chat_(chat) {}

    IngestResult ingest(std::span<const SensorReading> batch);
    /// Throws std::invalid_argument for a malformed body.
    IngestResult ingest_ndjson(std::string_view body);

  private:
    store::Store& store_;
    alerts::AlertMonitor* monitor_;
    chat::ChatService* chat_;
};

/// In-process uplink: gateway batches go straight to an ingestor.
class IngestorUplink final : public gateway::Uplink {
  public:
    explicit IngestorUplink(Ingestor& ingestor) : ingestor_(ingestor) {}
    gateway::AckMap post(std::span<const SensorReading> batch) override { return ingestor_.ingest(batch).acked; }

  private:
    Ingestor& ingestor_;
};

struct ServiceContext {
    store::Store& store;
    Ingestor& ingestor;
    chat::ChatService& chat;
    /// Outbox inspection is only served for the recording provider.
    chat::MockProvider* outbox = nullptr;
    std::function<Timestamp()> clock;
    std::optional<std::filesystem::path> static_dir;
};

/// JSON API:
///   POST /v1/ingest                     NDJSON readings -> {"acked": {...}, "rejected": n, ...}
///   POST /v1/webhook                    inbound message -> 200 {"status": outcome}; 400; 404
///   POST /v1/onboard                    profile -> 201 onboarding state; 400; 409
///   GET  /v1/onboard?phone=             onboarding state
///   GET  /v1/outbox?phone=              delivered messages
///   GET  /v1/farms                      profiles
///   GET  /v1/farms/{id}                 profile
///   GET  /v1/farms/{id}/latest?metric=  latest value (all metrics without `metric`)
///   GET  /v1/farms/{id}/series?metric=&from=&to=
///   GET  /v1/farms/{id}/trend?metric=&days=
///   GET  /v1/farms/{id}/alerts
///   GET  /v1/farms/{id}/chat            chat log
///   POST /v1/farms/{id}/chat            {"body", "kind"} -> 202, answered through the chat flow
///   GET  /healthz
/// Errors are {"error": "..."}.
class ApiServer {
  public:
    explicit ApiServer(ServiceContext ctx);
    ~ApiServer();

    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port;
    /// the bound port is returned. Throws agri::ConfigError when binding fails.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    /// Serves on the calling thread until stop().
    void listen(const std::string& host, int port);
    void stop();

    [[nodiscard]] int port() const { return port_; }

  private:
    void routes();

    ServiceContext ctx_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<std::uint64_t> next_ui_id_{1};
};

} // namespace agri::service
