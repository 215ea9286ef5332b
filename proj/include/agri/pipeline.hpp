#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "agri/common.hpp"
#include "agri/datastore.hpp"
#include "agri/errors.hpp"
#include "agri/feeds.hpp"
#include "agri/knowledge.hpp"
#include "agri/llm.hpp"
#include "agri/prompt.hpp"

namespace agri::pipeline {

// ---------------------------------------------------------------------------
// Data requirement
// ---------------------------------------------------------------------------

enum class Window : std::uint8_t { latest, last_24h, last_7d };

[[nodiscard]] std::string_view window_name(Window w);
[[nodiscard]] Window parse_window(std::string_view name);
[[nodiscard]] Timestamp window_seconds(Window w);

struct MetricRequest {
    Metric metric = Metric::moisture;
    Window window = Window::latest;
    bool operator==(const MetricRequest&) const = default;
};

/// What a question needs before it can be answered. Serializes to the
/// versioned wire form
///   {"v":1,"metrics":[{"kind":"moisture","window":"last_7d"}],"forecast_days":2,
///    "needs_market":false,"kb_query":"irrigation scheduling cotton","reply_language":"ur"}
/// with kb_query omitted when absent.
struct DataRequirement {
    std::vector<MetricRequest> metrics;
    int forecast_days = 0;
    bool needs_market = false;
    std::optional<std::string> kb_query;
    Language reply_language = Language::en;

    /// Throws agri::SchemaError unless at least one input is requested and
    /// forecast_days is within [0, 14].
    void validate() const;
    [[nodiscard]] std::string to_json() const;
    /// Strict schema check. Throws agri::SchemaError.
    static DataRequirement from_json(std::string_view json_text);

    bool operator==(const DataRequirement&) const = default;
};

inline constexpr int kRequirementVersion = 1;

// ---------------------------------------------------------------------------
// Intent parsing
// ---------------------------------------------------------------------------

class IntentParser {
  public:
    virtual ~IntentParser() = default;
    /// `message_en` is already English-normalized. Throws agri::UnparseableIntent.
    virtual DataRequirement parse(std::string_view message_en) = 0;
};

/// Keyword table:
///   {"version": 1, "rules": [{"keywords": ["irrigat", "water"],
///     "metrics": [{"kind": "moisture", "window": "last_7d"}], "forecast_days": 2,
///     "needs_market": false, "kb_query": "irrigation scheduling"}]}
/// Every rule with a keyword contained in the lowercased message contributes;
/// metrics are unioned (wider window wins), forecast_days takes the maximum
/// and kb queries are concatenated. A message matching no rule becomes a pure
/// knowledge query.
class RuleIntentParser final : public IntentParser {
  public:
    struct Rule {
        std::vector<std::string> keywords;
        std::vector<MetricRequest> metrics;
        int forecast_days = 0;
        bool needs_market = false;
        std::string kb_query;
    };

    explicit RuleIntentParser(std::vector<Rule> rules);
    static RuleIntentParser parse_table(std::string_view json_text);
    static RuleIntentParser load(const std::filesystem::path& path);

    DataRequirement parse(std::string_view message_en) override;

  private:
    std::vector<Rule> rules_;
};

/// Asks the backend's intent stage for the requirement document and falls
/// back to the rule parser when the output is not schema-valid.
class LlmIntentParser final : public IntentParser {
  public:
    LlmIntentParser(llm::Backend& backend, const llm::TemplateSet& templates, IntentParser& fallback);

    DataRequirement parse(std::string_view message_en) override;

    /// Number of parses that fell back to the rule table.
    [[nodiscard]] std::size_t fallbacks() const { return fallbacks_.load(); }

  private:
    llm::Backend& backend_;
    const llm::TemplateSet& templates_;
    IntentParser& fallback_;
    std::atomic<std::size_t> fallbacks_{0};
};

// ---------------------------------------------------------------------------
// Retry
// ---------------------------------------------------------------------------

struct RetryPolicy {
    int retries = 2;
    double base_delay_s = 1.0;
    double factor = 2.0;
    /// Wall-clock budget of one pipeline run.
    double budget_s = 60.0;
};

/// Runs callables with retry on agri::RetryableError, sleeping
/// base * factor^k between attempts, inside a shared time budget.
class RetryRunner {
  public:
    /// Single attempt, no budget.
    RetryRunner();
    RetryRunner(RetryPolicy policy, TimeSource& time);

    /// Rethrows the last error once retries are exhausted, or throws
    /// agri::PipelineExhausted when the budget runs out first.
    template <typename F>
    auto run(F&& fn, int* attempts_out = nullptr) -> decltype(fn()) {
        int attempt = 0;
        while (true) {
            check_budget();
            ++attempt;
            if (attempts_out != nullptr) {
                *attempts_out = attempt;
            }
            try {
                return fn();
            } catch (const RetryableError&) {
                if (attempt > policy_.retries) {
                    throw;
                }
                backoff(attempt);
            }
        }
    }

    [[nodiscard]] double elapsed() const;
    [[nodiscard]] const RetryPolicy& policy() const { return policy_; }
    [[nodiscard]] TimeSource* time() const { return time_; }

  private:
    void check_budget() const;
    void backoff(int attempt);

    RetryPolicy policy_;
    TimeSource* time_ = nullptr;
    double start_ = 0.0;
};

// ---------------------------------------------------------------------------
// Context
// ---------------------------------------------------------------------------

struct ReadingFact {
    Metric metric = Metric::moisture;
    Window window = Window::latest;
    std::vector<store::Sample> samples;
    Timestamp from = 0;
    Timestamp to = 0;
};

/// A rendered statement about gathered data with the citations that support it.
struct Fact {
    std::string text;
    std::vector<Citation> citations;
};

struct EnrichedContext {
    DataRequirement requirement;
    FarmProfile profile;
    std::string question_en;
    Timestamp now = 0;
    std::vector<ChatRecord> history;

    std::vector<ReadingFact> readings;
    std::optional<feeds::ForecastWindow> forecast;
    std::optional<feeds::PriceSeries> prices;
    std::vector<kb::ScoredPassage> passages;
    /// Inputs that were requested but could not be gathered.
    std::vector<std::string> absent;
    /// Extra statements built by the caller (daily summary aggregates).
    std::vector<Fact> extra_facts;

    [[nodiscard]] bool consumed_sensor() const;
    [[nodiscard]] bool gathered_any() const;
    /// Fact lines with inline citation markers, in a stable order.
    [[nodiscard]] std::vector<Fact> facts() const;
    /// Statements about missing inputs (no numbers, no citations).
    [[nodiscard]] std::vector<std::string> gaps() const;
    /// Text backing each citation that may appear in a reply.
    [[nodiscard]] std::map<Citation, std::string> supports() const;
};

/// "30%", "4.5", "25 °C", "900 µS/cm", "120 mg/kg".
[[nodiscard]] std::string format_metric_value(Metric m, double v);

struct EnrichSources {
    store::Store& store;
    feeds::FeedProvider* feeds = nullptr;
    const kb::Retriever* retriever = nullptr;
    std::size_t kb_k = 4;
};

/// Gathers every declared input. Optional inputs (forecast, market,
/// passages) that stay unavailable after retries are recorded as absent.
/// A forecast is fetched only when forecast_days > 0.
[[nodiscard]] EnrichedContext enrich(const DataRequirement& req, const FarmProfile& profile,
                                     std::string_view question_en, Timestamp now, const EnrichSources& sources,
                                     RetryRunner& retry);

// ---------------------------------------------------------------------------
// Grounding and synthesis
// ---------------------------------------------------------------------------

struct GroundingResult {
    std::vector<Citation> citations;
    std::vector<std::string> violations;
    [[nodiscard]] bool ok() const { return violations.empty(); }
};

/// Inline markers "[R:...]", "[P:...]", ... in order of first appearance.
[[nodiscard]] std::vector<Citation> extract_citations(std::string_view text);
[[nodiscard]] std::string strip_citations(std::string_view text);

/// Checks a draft against the context:
///  - every marker resolves to a gathered input;
///  - every sentence stating a number about a soil metric carries a marker
///    whose supporting text contains each of the sentence's numbers;
///  - a context with gathered inputs yields at least one citation.
[[nodiscard]] GroundingResult check_grounding(std::string_view draft, const std::map<Citation, std::string>& supports,
                                              bool require_citation);

struct AdvisoryReply {
    std::string text;
    std::string text_en;
    Language language = Language::en;
    std::vector<Citation> citations;
    Timestamp generated_at = 0;
    /// The deterministic template reply replaced the model draft.
    bool fallback = false;
    /// A status or clarification message rather than an answer.
    bool status = false;
    int grounding_retries = 0;
    /// The delivered draft passed the grounding check.
    bool grounded = true;
    /// Sensor readings were among the gathered inputs.
    bool consumed_sensor = false;
    /// Text of every gathered input (facts and passages), for scoring.
    std::vector<std::string> contexts;
};

[[nodiscard]] nlohmann::json to_json(const AdvisoryReply& r);

struct SynthesisDeps {
    llm::Backend& backend;
    llm::Translator& translator;
    const llm::TemplateSet& templates;
};

/// English draft, grounded: render prompt, call the backend, check grounding,
/// regenerate once on violation, then fall back to a template reply built
/// only from gathered values. Backend errors propagate.
[[nodiscard]] AdvisoryReply draft_reply(const EnrichedContext& ctx, SynthesisDeps& deps,
                                        llm::Stage stage = llm::Stage::synthesis);

/// Translates the English text into `lang` and validates its script,
/// retranslating once on failure. Throws agri::Error if the script stays wrong.
void localize(AdvisoryReply& reply, Language lang, llm::Translator& translator);

/// draft_reply followed by localize into the requirement's reply language.
[[nodiscard]] AdvisoryReply synthesize(const EnrichedContext& ctx, SynthesisDeps& deps);

/// Reply assembled from the context's facts and passages alone.
[[nodiscard]] std::string template_reply(const EnrichedContext& ctx);

/// Whether a citation names an input that exists: a stored reading of the
/// farm, a non-empty stored window, an indexed passage, the given forecast
/// or price series.
[[nodiscard]] bool citation_resolves(const Citation& c, const store::Store& store, const std::string& farm_id,
                                     const kb::Retriever* retriever,
                                     const std::optional<feeds::ForecastWindow>& forecast = std::nullopt,
                                     const std::optional<feeds::PriceSeries>& prices = std::nullopt);

/// Fixed status/clarification texts, already in the target script.
enum class StatusKind : std::uint8_t { unavailable, clarify, onboarding, activated };
[[nodiscard]] std::string status_message(StatusKind kind, Language lang);

} // namespace agri::pipeline
