#include "agri/service.hpp"

#include <charconv>

#include <fmt/format.h>
#include <httplib.h>

#include "agri/errors.hpp"

namespace agri::service {

using nlohmann::json;

json to_json(const IngestResult& r) {
    json acked = json::object();
    for (const auto& [node, seq] : r.acked) {
        acked[node] = seq;
    }
    json alerts = json::array();
    for (const auto& a : r.alerts) {
        alerts.push_back(agri::to_json(a));
    }
    return {{"acked", acked},
            {"stored", r.stored},
            {"duplicates", r.duplicates},
            {"rejected", r.rejected},
            {"alerts", alerts}};
}

IngestResult Ingestor::ingest(std::span<const SensorReading> batch) {
    IngestResult result;
    for (const auto& reading : batch) {
        auto& ack = result.acked[reading.node_id];
        ack = std::max(ack, reading.seq);

        const auto farm_id = store_.farm_for_node(reading.node_id);
        if (!farm_id || validate_reading(reading)) {
            ++result.rejected;
            continue;
        }
        if (store_.append_reading(*farm_id, reading) == store::AppendResult::duplicate_ignored) {
            ++result.duplicates;
            continue;
        }
        ++result.stored;
        if (monitor_ == nullptr) {
            continue;
        }
        if (auto alert = monitor_->on_reading(*farm_id, reading)) {
            if (chat_ != nullptr) {
                chat_->notify(*alert);
            }
            result.alerts.push_back(std::move(*alert));
        }
    }
    return result;
}

IngestResult Ingestor::ingest_ndjson(std::string_view body) {
    std::vector<SensorReading> batch;
    try {
        batch = parse_ndjson(body);
    } catch (const json::exception& e) {
        throw std::invalid_argument(e.what());
    }
    return ingest(batch);
}

// ---------------------------------------------------------------------------

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, std::string_view message) {
    reply(res, status, json{{"error", message}});
}

template <typename T>
std::optional<T> number_param(const httplib::Request& req, const char* key) {
    if (!req.has_param(key)) {
        return std::nullopt;
    }
    const auto s = req.get_param_value(key);
    T value{};
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw std::invalid_argument(fmt::format("'{}' is not a number", key));
    }
    return value;
}

Metric metric_param(const httplib::Request& req) {
    if (!req.has_param("metric")) {
        throw std::invalid_argument("'metric' is required");
    }
    auto m = try_parse_metric(req.get_param_value("metric"));
    if (!m) {
        throw std::invalid_argument(fmt::format("unknown metric '{}'", req.get_param_value("metric")));
    }
    return *m;
}

json sample_json(const store::Sample& s) {
    return {{"ts", s.ts}, {"value", s.value}, {"node_id", s.node_id}, {"seq", s.seq}};
}

} // namespace

ApiServer::ApiServer(ServiceContext ctx) : ctx_(std::move(ctx)), server_(std::make_unique<httplib::Server>()) {
    routes();
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::routes() {
    auto& srv = *server_;

    // Handlers translate domain errors; anything else becomes a 500.
    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const UnknownFarm& e) {
            fail(res, 404, e.what());
        } catch (const InsufficientData& e) {
            fail(res, 422, e.what());
        } catch (const std::invalid_argument& e) {
            fail(res, 400, e.what());
        } catch (const UnsupportedLanguage& e) {
            fail(res, 400, e.what());
        } catch (const SchemaError& e) {
            fail(res, 400, e.what());
        } catch (const json::exception& e) {
            fail(res, 400, e.what());
        } catch (const std::exception& e) {
            fail(res, 500, e.what());
        }
    });

    srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, {{"ok", true}}); });

    srv.Post("/v1/ingest", [this](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, to_json(ctx_.ingestor.ingest_ndjson(req.body)));
    });

    srv.Post("/v1/webhook", [this](const httplib::Request& req, httplib::Response& res) {
        chat::InboundMessage msg;
        try {
            msg = chat::InboundMessage::from_json(json::parse(req.body));
        } catch (const json::exception& e) {
            return fail(res, 400, e.what());
        } catch (const SchemaError& e) {
            return fail(res, 400, e.what());
        }
        const auto outcome = ctx_.chat.receive(msg);
        if (outcome == chat::WebhookOutcome::unknown_phone) {
            return fail(res, 404, fmt::format("unknown phone {}", msg.from));
        }
        reply(res, 200, {{"status", chat::webhook_outcome_name(outcome)}, {"message_id", msg.message_id}});
    });

    srv.Post("/v1/onboard", [this](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        auto profile = profile_from_json(body);
        validate_phone(profile.phone);
        chat::OnboardingState state;
        try {
            state = ctx_.chat.onboard(profile);
        } catch (const DuplicatePhone& e) {
            return fail(res, 409, e.what());
        }
        for (const auto& node : body.value("nodes", std::vector<std::string>{})) {
            ctx_.store.attach_node(node, state.profile.farm_id);
        }
        reply(res, 201, chat::to_json(state));
    });

    srv.Get("/v1/onboard", [this](const httplib::Request& req, httplib::Response& res) {
        const auto phone = req.get_param_value("phone");
        auto state = ctx_.chat.onboarding_state(phone);
        if (!state) {
            return fail(res, 404, fmt::format("unknown phone {}", phone));
        }
        reply(res, 200, chat::to_json(*state));
    });

    srv.Get("/v1/outbox", [this](const httplib::Request& req, httplib::Response& res) {
        if (ctx_.outbox == nullptr) {
            return fail(res, 404, "outbox inspection needs the mock provider");
        }
        std::optional<std::string> phone;
        if (req.has_param("phone")) {
            phone = req.get_param_value("phone");
        }
        json out = json::array();
        for (const auto& m : ctx_.outbox->outbox(phone)) {
            out.push_back(chat::to_json(m));
        }
        reply(res, 200, {{"messages", out}});
    });

    srv.Get("/v1/farms", [this](const httplib::Request&, httplib::Response& res) {
        json out = json::array();
        for (const auto& p : ctx_.store.farms()) {
            out.push_back(agri::to_json(p));
        }
        reply(res, 200, {{"farms", out}});
    });

    auto require_farm = [this](const httplib::Request& req) {
        const auto id = req.matches[1].str();
        auto profile = ctx_.store.farm(id);
        if (!profile) {
            throw UnknownFarm(fmt::format("unknown farm {}", id));
        }
        return *profile;
    };

    srv.Get(R"(/v1/farms/([^/]+))", [require_farm](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, agri::to_json(require_farm(req)));
    });

    srv.Get(R"(/v1/farms/([^/]+)/latest)", [this, require_farm](const httplib::Request& req, httplib::Response& res) {
        const auto farm = require_farm(req);
        json values = json::object();
        auto put = [&](Metric m) {
            auto s = ctx_.store.latest(farm.farm_id, m);
            values[std::string(metric_name(m))] = s ? sample_json(*s) : json(nullptr);
        };
        if (req.has_param("metric")) {
            put(metric_param(req));
        } else {
            for (auto m : kAllMetrics) {
                put(m);
            }
        }
        reply(res, 200, {{"farm_id", farm.farm_id}, {"latest", values}});
    });

    srv.Get(R"(/v1/farms/([^/]+)/series)", [this, require_farm](const httplib::Request& req, httplib::Response& res) {
        const auto farm = require_farm(req);
        const auto metric = metric_param(req);
        const auto from = number_param<Timestamp>(req, "from").value_or(std::numeric_limits<Timestamp>::min());
        const auto to = number_param<Timestamp>(req, "to").value_or(std::numeric_limits<Timestamp>::max());
        json points = json::array();
        for (const auto& s : ctx_.store.window(farm.farm_id, metric, from, to)) {
            points.push_back(sample_json(s));
        }
        reply(res, 200,
              {{"farm_id", farm.farm_id},
               {"metric", metric_name(metric)},
               {"unit", metric_unit(metric)},
               {"points", points}});
    });

    srv.Get(R"(/v1/farms/([^/]+)/trend)", [this, require_farm](const httplib::Request& req, httplib::Response& res) {
        const auto farm = require_farm(req);
        const auto metric = metric_param(req);
        const auto days = number_param<double>(req, "days").value_or(7.0);
        if (!(days > 0.0)) {
            throw std::invalid_argument("'days' must be positive");
        }
        auto j = store::to_json(ctx_.store.detect_trend(farm.farm_id, metric, days));
        j["farm_id"] = farm.farm_id;
        reply(res, 200, j);
    });

    srv.Get(R"(/v1/farms/([^/]+)/alerts)", [this, require_farm](const httplib::Request& req, httplib::Response& res) {
        const auto farm = require_farm(req);
        json out = json::array();
        for (const auto& a : ctx_.store.alerts(farm.farm_id)) {
            out.push_back(agri::to_json(a));
        }
        reply(res, 200, {{"farm_id", farm.farm_id}, {"alerts", out}});
    });

    srv.Get(R"(/v1/farms/([^/]+)/chat)", [this, require_farm](const httplib::Request& req, httplib::Response& res) {
        const auto farm = require_farm(req);
        json out = json::array();
        for (const auto& c : ctx_.store.chat_history(farm.farm_id)) {
            out.push_back(agri::to_json(c));
        }
        reply(res, 200, {{"farm_id", farm.farm_id}, {"messages", out}});
    });

    srv.Post(R"(/v1/farms/([^/]+)/chat)", [this, require_farm](const httplib::Request& req, httplib::Response& res) {
        const auto farm = require_farm(req);
        const auto body = json::parse(req.body);
        chat::InboundMessage msg;
        msg.message_id = fmt::format("ui-{}", next_ui_id_++);
        msg.from = farm.phone;
        msg.body = body.at("body").get<std::string>();
        if (msg.body.empty()) {
            throw std::invalid_argument("empty message body");
        }
        msg.kind = parse_message_kind(body.value("kind", std::string("text")));
        msg.received_at = ctx_.clock();
        const auto outcome = ctx_.chat.receive(msg);
        reply(res, 202, {{"status", chat::webhook_outcome_name(outcome)}, {"message_id", msg.message_id}});
    });

    if (ctx_.static_dir) {
        if (!srv.set_mount_point("/", ctx_.static_dir->string())) {
            throw ConfigError(fmt::format("static directory {} not found", ctx_.static_dir->string()));
        }
    }
}

int ApiServer::start(const std::string& host, int port) {
    port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (port_ <= 0) {
        throw ConfigError(fmt::format("cannot bind {}:{}", host, port));
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void ApiServer::listen(const std::string& host, int port) {
    port_ = port;
    if (!server_->listen(host, port)) {
        throw ConfigError(fmt::format("cannot listen on {}:{}", host, port));
    }
}

void ApiServer::stop() {
    if (server_) {
        server_->stop();
    }
    if (thread_.joinable()) {
        thread_.join();
    }
}

} // namespace agri::service
