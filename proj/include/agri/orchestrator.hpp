#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "agri/pipeline.hpp"

namespace agri::pipeline {

/// One line of the per-stage latency log:
///   {"farm_id":"farm-1","stage":"enrich","ms":12.5,"outcome":"ok","attempts":1}
/// Outcomes: ok, retried (succeeded after a retry), degraded (optional
/// inputs missing), failed.
struct StageRecord {
    std::string farm_id;
    std::string stage;
    double ms = 0.0;
    std::string outcome;
    int attempts = 1;
};

[[nodiscard]] nlohmann::json to_json(const StageRecord& r);

class StageLog {
  public:
    /// Records are kept in memory and, when a sink is given, written to it as JSON lines.
    explicit StageLog(std::ostream* sink = nullptr) : sink_(sink) {}
    void record(StageRecord r);
    [[nodiscard]] std::vector<StageRecord> records() const;

  private:
    mutable std::mutex mu_;
    std::ostream* sink_;
    std::vector<StageRecord> records_;
};

struct OrchestratorDeps {
    store::Store& store;
    feeds::FeedProvider* feeds = nullptr;
    const kb::Retriever* retriever = nullptr;
    llm::Backend& backend;
    llm::Translator& translator;
    const llm::TemplateSet& templates;
    IntentParser& intent;
    TimeSource& time;
    RetryPolicy retry{};
    StageLog* log = nullptr;
    std::size_t kb_k = 4;
};

/// Runs translate_in -> parse_intent -> enrich -> synthesize -> translate_out
/// for one message. Each stage retries transient failures inside the run's
/// time budget. Messages of one farm are processed one at a time.
class Orchestrator {
  public:
    explicit Orchestrator(OrchestratorDeps deps);

    /// Answers a message and appends both sides to the chat log. Never
    /// throws for pipeline failures: an unparseable question yields a
    /// clarification request and exhausted retries a status message, both
    /// in the farm language.
    AdvisoryReply handle(const FarmProfile& profile, std::string_view body, Timestamp ts,
                         MessageKind kind = MessageKind::text);

    /// Last-24-hour aggregates, notable 7-day trends and tomorrow's forecast,
    /// appended to the chat log as an outbound message.
    AdvisoryReply daily_summary(const FarmProfile& profile, Timestamp now);

    [[nodiscard]] OrchestratorDeps& deps() { return deps_; }

  private:
    std::mutex& farm_lock(const std::string& farm_id);
    template <typename F>
    auto stage(const std::string& farm_id, const char* name, RetryRunner& retry, F&& fn) -> decltype(fn());

    OrchestratorDeps deps_;
    std::mutex locks_mu_;
    std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

/// Fires each farm's daily summaries at their local times. A summary is due
/// when its instant falls in (previous tick, now]; each (farm, local date,
/// time) is sent at most once.
class SummaryScheduler {
  public:
    using Sink = std::function<void(const FarmProfile&, const AdvisoryReply&)>;

    SummaryScheduler(store::Store& store, Orchestrator& orchestrator, Sink sink, Timestamp tick_s = 60);

    /// Returns the number of summaries produced.
    std::size_t tick(Timestamp now);

  private:
    store::Store& store_;
    Orchestrator& orchestrator_;
    Sink sink_;
    Timestamp tick_s_;
    std::optional<Timestamp> last_;
    std::set<std::tuple<std::string, std::string, int>> sent_;
};

} // namespace agri::pipeline
