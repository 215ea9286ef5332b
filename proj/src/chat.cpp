#include "agri/chat.hpp"

#include <fmt/format.h>

#include "agri/script.hpp"

namespace agri::chat {

using nlohmann::json;

InboundMessage InboundMessage::from_json(const json& j) {
    if (!j.is_object()) {
        throw SchemaError("webhook payload must be an object");
    }
    auto str = [&](const char* key) {
        if (!j.contains(key) || !j.at(key).is_string()) {
            throw SchemaError(fmt::format("'{}' must be a string", key));
        }
        return j.at(key).get<std::string>();
    };
    InboundMessage m;
    m.message_id = str("message_id");
    m.from = str("from");
    m.body = str("body");
    const auto kind = str("kind");
    if (kind != "text" && kind != "voice") {
        throw SchemaError(fmt::format("unknown message kind '{}'", kind));
    }
    m.kind = parse_message_kind(kind);
    if (!j.contains("timestamp") || !j.at("timestamp").is_number_integer()) {
        throw SchemaError("'timestamp' must be an integer");
    }
    m.received_at = j.at("timestamp").get<Timestamp>();
    if (m.message_id.empty()) {
        throw SchemaError("empty message_id");
    }
    try {
        validate_phone(m.from);
    } catch (const std::invalid_argument& e) {
        throw SchemaError(e.what());
    }
    return m;
}

json InboundMessage::to_json() const {
    return {{"message_id", message_id},
            {"from", from},
            {"kind", message_kind_name(kind)},
            {"body", body},
            {"timestamp", received_at}};
}

std::string_view onboarding_stage_name(OnboardingStage s) {
    return s == OnboardingStage::active ? "active" : "pending_test_message";
}

json to_json(const OnboardingState& s) {
    return {{"phone", s.phone}, {"stage", onboarding_stage_name(s.stage)}, {"profile", agri::to_json(s.profile)}};
}

json to_json(const OutboundMessage& m) {
    json cites = json::array();
    for (const auto& c : m.citations) {
        cites.push_back(agri::to_json(c));
    }
    return {{"message_id", m.message_id}, {"to", m.to},
            {"kind", message_kind_name(m.kind)}, {"body", m.body},
            {"language", language_code(m.language)}, {"citations", cites},
            {"sent_at", m.sent_at}, {"category", m.category}};
}

std::string_view webhook_outcome_name(WebhookOutcome o) {
    switch (o) {
    case WebhookOutcome::enqueued: return "enqueued";
    case WebhookOutcome::duplicate: return "duplicate";
    case WebhookOutcome::activated: return "activated";
    case WebhookOutcome::unknown_phone: return "unknown_phone";
    }
    return "enqueued";
}

// ---------------------------------------------------------------------------

DeliveryReceipt MockProvider::deliver(const OutboundMessage& message) {
    std::lock_guard lock(mu_);
    ++attempts_;
    if (reject_ > 0) {
        --reject_;
        throw ProviderRejected(fmt::format("provider refused {}", message.message_id));
    }
    DeliveryReceipt receipt{message.message_id, 1, false};
    if (!seen_.insert(message.message_id).second) {
        receipt.duplicate = true;
        return receipt;
    }
    outbox_.push_back(message);
    if (drop_ack_ > 0) {
        --drop_ack_;
        throw ProviderRejected(fmt::format("acknowledgement for {} lost", message.message_id));
    }
    return receipt;
}

void MockProvider::reject_next(int n) {
    std::lock_guard lock(mu_);
    reject_ = n;
}

void MockProvider::drop_ack_next(int n) {
    std::lock_guard lock(mu_);
    drop_ack_ = n;
}

std::vector<OutboundMessage> MockProvider::outbox(const std::optional<std::string>& phone) const {
    std::lock_guard lock(mu_);
    if (!phone) {
        return outbox_;
    }
    std::vector<OutboundMessage> out;
    for (const auto& m : outbox_) {
        if (m.to == *phone) {
            out.push_back(m);
        }
    }
    return out;
}

std::size_t MockProvider::delivery_attempts() const {
    std::lock_guard lock(mu_);
    return attempts_;
}

// ---------------------------------------------------------------------------

namespace {

RealTimeSource& real_time() {
    static RealTimeSource t;
    return t;
}

} // namespace

ChatService::ChatService(store::Store& store, OutboundProvider& provider, pipeline::Orchestrator* orchestrator,
                         std::function<Timestamp()> clock, pipeline::RetryPolicy send_retry, TimeSource* sleeper)
    : store_(store),
      provider_(provider),
      orchestrator_(orchestrator),
      clock_(std::move(clock)),
      send_retry_(send_retry),
      sleeper_(sleeper != nullptr ? sleeper : &real_time()) {}

ChatService::~ChatService() { stop(); }

OnboardingState ChatService::onboard(FarmProfile profile) {
    if (profile.crops.empty()) {
        throw std::invalid_argument("at least one crop is required");
    }
    profile.active = false;
    profile.created_at = clock_();
    auto stored = store_.add_farm(std::move(profile));
    OutboundMessage msg;
    msg.to = stored.phone;
    msg.body = pipeline::status_message(pipeline::StatusKind::onboarding, stored.language);
    msg.language = stored.language;
    msg.category = "onboarding";
    try {
        deliver(std::move(msg), stored);
    } catch (const std::exception& e) {
        incident(fmt::format("onboarding message to {} failed: {}", stored.phone, e.what()));
    }
    return {stored.phone, OnboardingStage::pending_test_message, stored};
}

std::optional<OnboardingState> ChatService::onboarding_state(const std::string& phone) const {
    auto p = store_.farm_by_phone(phone);
    if (!p) {
        return std::nullopt;
    }
    return OnboardingState{phone, p->active ? OnboardingStage::active : OnboardingStage::pending_test_message, *p};
}

WebhookOutcome ChatService::receive(const InboundMessage& message) {
    {
        std::lock_guard lock(mu_);
        if (seen_ids_.count(message.message_id) != 0) {
            return WebhookOutcome::duplicate;
        }
    }
    auto profile = store_.farm_by_phone(message.from);
    if (!profile) {
        return WebhookOutcome::unknown_phone;
    }
    {
        std::lock_guard lock(mu_);
        if (!seen_ids_.insert(message.message_id).second) {
            return WebhookOutcome::duplicate;
        }
    }
    if (!profile->active) {
        profile->active = true;
        store_.update_farm(*profile);
        store_.append_chat({profile->farm_id, Direction::inbound, message.received_at, message.body,
                            profile->language, message.kind, {}});
        OutboundMessage msg;
        msg.to = profile->phone;
        msg.body = pipeline::status_message(pipeline::StatusKind::activated, profile->language);
        msg.language = profile->language;
        msg.category = "status";
        try {
            deliver(std::move(msg), *profile);
        } catch (const std::exception& e) {
            incident(fmt::format("activation message to {} failed: {}", profile->phone, e.what()));
        }
        return WebhookOutcome::activated;
    }
    const auto phone = message.from;
    enqueue(phone, [this, message] {
        auto current = store_.farm_by_phone(message.from);
        if (!current) {
            return;
        }
        if (orchestrator_ == nullptr) {
            store_.append_chat({current->farm_id, Direction::inbound, message.received_at, message.body,
                                current->language, message.kind, {}});
            return;
        }
        auto reply = orchestrator_->handle(*current, message.body, message.received_at, message.kind);
        send(reply, message.from, message.kind == MessageKind::voice, reply.status ? "status" : "reply");
    });
    return WebhookOutcome::enqueued;
}

DeliveryReceipt ChatService::deliver(OutboundMessage message, const FarmProfile& profile) {
    if (message.language != profile.language) {
        throw LanguageMismatch(fmt::format("message in {} for a {} profile", language_code(message.language),
                                           language_code(profile.language)));
    }
    if (!llm::validate_script(message.body, profile.language).valid) {
        throw LanguageMismatch(fmt::format("message body is not in the {} script", language_code(profile.language)));
    }
    if (message.message_id.empty()) {
        message.message_id = fmt::format("out-{}", next_id_.fetch_add(1));
    }
    message.sent_at = clock_();
    pipeline::RetryRunner retry(send_retry_, *sleeper_);
    int attempts = 1;
    auto receipt = retry.run([&] { return provider_.deliver(message); }, &attempts);
    receipt.attempts = attempts;
    if (message.category != "reply" && message.category != "summary" && message.category != "status") {
        store_.append_chat({profile.farm_id, Direction::outbound, message.sent_at, message.body, message.language,
                            message.kind, message.citations});
    }
    return receipt;
}

DeliveryReceipt ChatService::send(const pipeline::AdvisoryReply& reply, const std::string& to_phone, bool as_voice,
                                  std::string category) {
    auto profile = store_.farm_by_phone(to_phone);
    if (!profile) {
        throw UnknownFarm(fmt::format("no farm registered for {}", to_phone));
    }
    OutboundMessage msg;
    msg.to = to_phone;
    msg.kind = as_voice ? MessageKind::voice : MessageKind::text;
    msg.body = reply.text;
    msg.language = reply.language;
    msg.citations = reply.citations;
    msg.category = std::move(category);
    return deliver(std::move(msg), *profile);
}

DeliveryReceipt ChatService::send(const Alert& alert, const std::string& to_phone, bool as_voice) {
    auto profile = store_.farm_by_phone(to_phone);
    if (!profile) {
        throw UnknownFarm(fmt::format("no farm registered for {}", to_phone));
    }
    OutboundMessage msg;
    msg.to = to_phone;
    msg.kind = as_voice ? MessageKind::voice : MessageKind::text;
    msg.body = alert.text;
    msg.language = alert.language;
    msg.citations = alert.citations;
    msg.category = "alert";
    return deliver(std::move(msg), *profile);
}

void ChatService::notify(const Alert& alert) {
    auto profile = store_.farm(alert.farm_id);
    if (!profile || !profile->active) {
        return;
    }
    const auto phone = profile->phone;
    enqueue(phone, [this, alert, phone] { send(alert, phone); });
}

// ---------------------------------------------------------------------------

void ChatService::enqueue(const std::string& phone, Job job) {
    {
        std::lock_guard lock(mu_);
        auto& q = queues_[phone];
        const bool was_idle = q.empty() && busy_.count(phone) == 0;
        q.push_back(std::move(job));
        if (was_idle) {
            ready_.push_back(phone);
        }
        ++jobs_enqueued_;
    }
    cv_.notify_one();
}

bool ChatService::run_one() {
    std::string phone;
    Job job;
    {
        std::unique_lock lock(mu_);
        if (ready_.empty()) {
            return false;
        }
        phone = ready_.front();
        ready_.pop_front();
        auto& q = queues_[phone];
        job = std::move(q.front());
        q.pop_front();
        busy_.insert(phone);
        ++in_flight_;
    }
    try {
        job();
    } catch (const std::exception& e) {
        incident(fmt::format("job for {} failed: {}", phone, e.what()));
    }
    {
        std::lock_guard lock(mu_);
        busy_.erase(phone);
        --in_flight_;
        auto it = queues_.find(phone);
        if (it != queues_.end() && !it->second.empty()) {
            ready_.push_back(phone);
        } else if (it != queues_.end()) {
            queues_.erase(it);
        }
        ++jobs_completed_;
    }
    cv_.notify_one();
    idle_cv_.notify_all();
    return true;
}

void ChatService::worker_loop() {
    while (true) {
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [&] { return stopping_ || !ready_.empty(); });
            if (stopping_ && ready_.empty()) {
                return;
            }
        }
        run_one();
    }
}

void ChatService::start(std::size_t workers) {
    std::lock_guard lock(mu_);
    stopping_ = false;
    for (std::size_t i = 0; i < workers; ++i) {
        workers_.emplace_back([this] { worker_loop(); });
    }
}

void ChatService::stop() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) {
        if (t.joinable()) {
            t.join();
        }
    }
    workers_.clear();
}

std::size_t ChatService::run_pending() {
    std::size_t n = 0;
    while (run_one()) {
        ++n;
    }
    return n;
}

void ChatService::wait_idle() {
    bool threaded = false;
    {
        std::lock_guard lock(mu_);
        threaded = !workers_.empty();
    }
    if (!threaded) {
        run_pending();
        return;
    }
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [&] { return ready_.empty() && in_flight_ == 0; });
}

void ChatService::incident(std::string what) {
    std::lock_guard lock(mu_);
    incidents_.push_back(std::move(what));
}

std::vector<std::string> ChatService::incidents() const {
    std::lock_guard lock(mu_);
    return incidents_;
}

} // namespace agri::chat
