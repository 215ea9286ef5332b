#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "agri/common.hpp"
#include "agri/datastore.hpp"
#include "agri/orchestrator.hpp"
#include "agri/pipeline.hpp"

namespace agri::chat {

/// Webhook payload:
///   {"message_id": "wamid.1", "from": "+923001234567", "kind": "text" | "voice",
///    "body": "...", "timestamp": 1760000000}
/// Voice messages carry their transcript in `body`.
struct InboundMessage {
    std::string message_id;
    std::string from;
    MessageKind kind = MessageKind::text;
    std::string body;
    Timestamp received_at = 0;

    /// Throws agri::SchemaError.
    static InboundMessage from_json(const nlohmann::json& j);
    [[nodiscard]] nlohmann::json to_json() const;
};

enum class OnboardingStage : std::uint8_t { pending_test_message, active };

[[nodiscard]] std::string_view onboarding_stage_name(OnboardingStage s);

struct OnboardingState {
    std::string phone;
    OnboardingStage stage = OnboardingStage::pending_test_message;
    FarmProfile profile;
};

[[nodiscard]] nlohmann::json to_json(const OnboardingState& s);

struct OutboundMessage {
    std::string message_id;
    std::string to;
    MessageKind kind = MessageKind::text;
    std::string body;
    Language language = Language::en;
    std::vector<Citation> citations;
    Timestamp sent_at = 0;
    /// reply, alert, summary, status or onboarding.
    std::string category = "reply";
};

[[nodiscard]] nlohmann::json to_json(const OutboundMessage& m);

struct DeliveryReceipt {
    std::string message_id;
    int attempts = 1;
    /// The provider had already accepted this message id.
    bool duplicate = false;
};

/// Messaging provider. Throws agri::ProviderRejected for a refused
/// delivery; implementations deduplicate by message id.
class OutboundProvider {
  public:
    virtual ~OutboundProvider() = default;
    virtual DeliveryReceipt deliver(const OutboundMessage& message) = 0;
};

/// Recording provider: accepted messages land in an inspectable outbox.
class MockProvider final : public OutboundProvider {
  public:
    DeliveryReceipt deliver(const OutboundMessage& message) override;

    /// Refuse the next n deliveries without recording them.
    void reject_next(int n);
    /// Record the next n deliveries but report them as failed, as when the
    /// provider's acknowledgement is lost.
    void drop_ack_next(int n);

    [[nodiscard]] std::vector<OutboundMessage> outbox(const std::optional<std::string>& phone = std::nullopt) const;
    [[nodiscard]] std::size_t delivery_attempts() const;

  private:
    mutable std::mutex mu_;
    std::vector<OutboundMessage> outbox_;
    std::set<std::string> seen_;
    int reject_ = 0;
    int drop_ack_ = 0;
    std::size_t attempts_ = 0;
};

enum class WebhookOutcome : std::uint8_t { enqueued, duplicate, activated, unknown_phone };

[[nodiscard]] std::string_view webhook_outcome_name(WebhookOutcome o);

/// Chat front end: onboarding, inbound dispatch, outbound delivery.
///
/// Inbound messages of one phone are handed to the pipeline strictly in
/// arrival order; different phones run concurrently on the worker pool.
/// With zero workers, jobs run when run_pending() is called.
class ChatService {
  public:
    ChatService(store::Store& store, OutboundProvider& provider, pipeline::Orchestrator* orchestrator,
                std::function<Timestamp()> clock, pipeline::RetryPolicy send_retry = {},
                TimeSource* sleeper = nullptr);
    ~ChatService();

    ChatService(const ChatService&) = delete;
    ChatService& operator=(const ChatService&) = delete;

    /// Stores the profile as pending and sends the activation test message.
    /// Throws agri::DuplicatePhone, std::invalid_argument for an invalid profile.
    OnboardingState onboard(FarmProfile profile);
    [[nodiscard]] std::optional<OnboardingState> onboarding_state(const std::string& phone) const;

    /// Duplicate message ids are acknowledged without a new job. The first
    /// inbound from a pending phone activates the account and locks its
    /// language.
    WebhookOutcome receive(const InboundMessage& message);

    /// Delivers in the farm language, retrying provider rejections under the
    /// same message id. Throws agri::LanguageMismatch when the text is not in
    /// the profile language, agri::UnknownFarm for an unknown phone and
    /// agri::ProviderRejected once retries are exhausted.
    DeliveryReceipt send(const pipeline::AdvisoryReply& reply, const std::string& to_phone, bool as_voice,
                         std::string category = "reply");
    DeliveryReceipt send(const Alert& alert, const std::string& to_phone, bool as_voice = false);

    /// Queues alert delivery behind the phone's pending messages.
    void notify(const Alert& alert);

    void start(std::size_t workers);
    void stop();
    /// Runs queued jobs on the calling thread until none are left.
    std::size_t run_pending();
    /// Blocks until every queued job has finished.
    void wait_idle();

    [[nodiscard]] std::size_t jobs_enqueued() const { return jobs_enqueued_.load(); }
    [[nodiscard]] std::size_t jobs_completed() const { return jobs_completed_.load(); }
    /// Delivery failures that were logged and dropped.
    [[nodiscard]] std::vector<std::string> incidents() const;

  private:
    using Job = std::function<void()>;

    void enqueue(const std::string& phone, Job job);
    bool run_one();
    void worker_loop();
    DeliveryReceipt deliver(OutboundMessage message, const FarmProfile& profile);
    void incident(std::string what);

    store::Store& store_;
    OutboundProvider& provider_;
    pipeline::Orchestrator* orchestrator_;
    std::function<Timestamp()> clock_;
    pipeline::RetryPolicy send_retry_;
    TimeSource* sleeper_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable idle_cv_;
    std::map<std::string, std::deque<Job>> queues_;
    std::deque<std::string> ready_;
    std::set<std::string> busy_;
    std::set<std::string> seen_ids_;
    std::vector<std::string> incidents_;
    std::vector<std::thread> workers_;
    bool stopping_ = false;
    std::size_t in_flight_ = 0;
    std::atomic<std::size_t> jobs_enqueued_{0};
    std::atomic<std::size_t> jobs_completed_{0};
    std::atomic<std::uint64_t> next_id_{1};
};

} // namespace agri::chat
