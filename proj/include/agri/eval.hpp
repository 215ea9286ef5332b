#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agri/common.hpp"
#include "agri/feeds.hpp"
#include "agri/knowledge.hpp"
#include "agri/llm.hpp"
#include "agri/pipeline.hpp"
#include "agri/prompt.hpp"
#include "agri/stats.hpp"

namespace agri::eval {

enum class Tier : std::uint8_t { easy, medium, hard };
enum class Dimension : std::uint8_t { correctness, coherence, relevance, conciseness };

inline constexpr std::array<Tier, 3> kTiers = {Tier::easy, Tier::medium, Tier::hard};
inline constexpr std::array<Dimension, 4> kDimensions = {Dimension::correctness, Dimension::coherence,
                                                         Dimension::relevance, Dimension::conciseness};

[[nodiscard]] std::string_view tier_name(Tier t);
[[nodiscard]] Tier parse_tier(std::string_view s);
[[nodiscard]] std::string_view dimension_name(Dimension d);
[[nodiscard]] Dimension parse_dimension(std::string_view s);

struct SensorContext {
    std::vector<SensorReading> readings;
    std::optional<feeds::ForecastWindow> forecast;
};

/// One benchmark record per line:
///   {"id": "maize-easy-01", "crop": "maize", "tier": "easy", "query": "...",
///    "sensor_context": {"readings": [<wire reading>...], "forecast": <forecast>|null},
///    "expected_facets": ["..."]}
struct BenchmarkItem {
    std::string id;
    std::string crop;
    Tier tier = Tier::easy;
    std::string query;
    SensorContext sensor_context;
    std::vector<std::string> expected_facets;
};

[[nodiscard]] nlohmann::json to_json(const BenchmarkItem& item);
[[nodiscard]] BenchmarkItem item_from_json(const nlohmann::json& j);

inline constexpr std::array<std::string_view, 3> kBenchmarkCrops = {"maize", "sugarcane", "spinach"};
inline constexpr std::size_t kItemsPerCell = 11;

/// Throws agri::ShapeError unless ids are unique and every (crop, tier) cell
/// holds exactly 11 items (99 in total); the message lists the counts found.
void check_shape(const std::vector<BenchmarkItem>& items);
[[nodiscard]] std::vector<BenchmarkItem> parse_benchmark(std::string_view ndjson, bool enforce_shape = true);
[[nodiscard]] std::vector<BenchmarkItem> load_benchmark(const std::filesystem::path& path,
                                                        bool enforce_shape = true);

// ---------------------------------------------------------------------------
// Answers
// ---------------------------------------------------------------------------

struct Answer {
    std::string text;
    std::vector<std::string> contexts;
    std::vector<Citation> citations;
    bool consumed_sensor = false;
    bool grounded = true;
    /// Every citation resolved against the inputs the answer was built from.
    bool citations_resolve = true;
    bool fallback = false;
    bool status = false;
};

/// Produces an answer for a benchmark item (the system under evaluation).
class AnswerSource {
  public:
    virtual ~AnswerSource() = default;
    virtual Answer answer(const BenchmarkItem& item) = 0;
};

struct PipelineFixtures {
    const kb::Retriever& retriever;
    llm::Backend& backend;
    llm::Translator& translator;
    const llm::TemplateSet& templates;
    pipeline::IntentParser& intent;
    TimeSource& time;
    Language language = Language::en;
};

/// Runs each item through the full orchestrator against a fresh in-memory
/// farm holding the item's sensor context and forecast.
class PipelineAnswerSource final : public AnswerSource {
  public:
    explicit PipelineAnswerSource(PipelineFixtures fixtures) : fx_(fixtures) {}
    Answer answer(const BenchmarkItem& item) override;

  private:
    PipelineFixtures fx_;
};

// ---------------------------------------------------------------------------
// Judges
// ---------------------------------------------------------------------------

using DimensionScores = std::array<double, 4>;

/// Scores an answer on the four dimensions, 0-100. Throws agri::JudgeUnavailable.
class Judge {
  public:
    virtual ~Judge() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    virtual DimensionScores score(const BenchmarkItem& item, const Answer& answer) = 0;
};

class ConstantJudge final : public Judge {
  public:
    ConstantJudge(std::string name, double value) : name_(std::move(name)), value_(value) {}
    [[nodiscard]] std::string name() const override { return name_; }
    DimensionScores score(const BenchmarkItem&, const Answer&) override { return {value_, value_, value_, value_}; }

  private:
    std::string name_;
    double value_;
};

/// Model-free judge:
///   correctness  share of expected facets whose content words are at least
///                `facet_threshold` covered by the answer
///   coherence    share of sentences with at least three words that end in punctuation
///   relevance    score_relevance of the answer for the query
///   conciseness  100 up to `word_budget` words, scaled down beyond
class LexicalJudge final : public Judge {
  public:
    explicit LexicalJudge(std::string name, double facet_threshold = 0.6, std::size_t word_budget = 120)
        : name_(std::move(name)), facet_threshold_(facet_threshold), word_budget_(word_budget) {}
    [[nodiscard]] std::string name() const override { return name_; }
    DimensionScores score(const BenchmarkItem& item, const Answer& answer) override;

  private:
    std::string name_;
    double facet_threshold_;
    std::size_t word_budget_;
};

/// Judge through a backend's judge stage. The model must answer with
///   {"correctness": 0-100, "coherence": ..., "relevance": ..., "conciseness": ...}
class BackendJudge final : public Judge {
  public:
    BackendJudge(std::string name, llm::Backend& backend, const llm::TemplateSet& templates)
        : name_(std::move(name)), backend_(backend), templates_(templates) {}
    [[nodiscard]] std::string name() const override { return name_; }
    DimensionScores score(const BenchmarkItem& item, const Answer& answer) override;

  private:
    std::string name_;
    llm::Backend& backend_;
    const llm::TemplateSet& templates_;
};

/// Four lexical judges with graded facet thresholds.
[[nodiscard]] std::vector<std::unique_ptr<Judge>> default_mock_jury();

// ---------------------------------------------------------------------------
// Jury suite
// ---------------------------------------------------------------------------

/// One judge's score of one item on one dimension in one run. Serialized as
///   {"run":1,"judge":"lex-a","item_id":"maize-easy-01","tier":"easy","dimension":"correctness","score":90}
struct ScoreRecord {
    int run = 1;
    std::string judge;
    std::string item_id;
    Tier tier = Tier::easy;
    Dimension dimension = Dimension::correctness;
    double score = 0.0;
};

[[nodiscard]] nlohmann::json to_json(const ScoreRecord& r);
[[nodiscard]] ScoreRecord record_from_json(const nlohmann::json& j);

struct CellStat {
    Tier tier = Tier::easy;
    Dimension dimension = Dimension::correctness;
    /// Mean over all judges and items of the tier, per run.
    std::vector<double> run_means;
    stats::MeanCI ci;
};

struct JuryReport {
    /// 12 cells, tiers easy -> hard, dimensions in declaration order.
    std::vector<CellStat> cells;
    /// judge -> tier -> dimension mean over all runs.
    std::map<std::string, std::array<DimensionScores, 3>> per_judge;
    /// "run/item/judge: reason" for skipped scorings.
    std::vector<std::string> skipped;
    std::size_t records = 0;
    int runs = 0;

    [[nodiscard]] const CellStat& cell(Tier t, Dimension d) const;
};

/// Statistics of one tier x dimension cell from its run means (Student t, df = runs - 1).
[[nodiscard]] CellStat cell_from_run_means(Tier t, Dimension d, std::vector<double> run_means);

/// Reduces score records to a report.
[[nodiscard]] JuryReport aggregate(const std::vector<ScoreRecord>& records);

/// Answers every item in every run and scores it with every judge. Judges
/// throwing agri::JudgeUnavailable skip that scoring and are reported.
[[nodiscard]] JuryReport run_suite(AnswerSource& source, const std::vector<BenchmarkItem>& items,
                                   const std::vector<Judge*>& judges, int runs = 3,
                                   std::vector<ScoreRecord>* records_out = nullptr);

// ---------------------------------------------------------------------------
// Grounding scores
// ---------------------------------------------------------------------------

/// Decides whether one claim is supported by the contexts.
class ClaimJudge {
  public:
    virtual ~ClaimJudge() = default;
    virtual bool supported(std::string_view claim, const std::vector<std::string>& contexts) = 0;
};

/// Supported iff at least `threshold` of the claim's content words occur in
/// one context.
class LexicalClaimJudge final : public ClaimJudge {
  public:
    explicit LexicalClaimJudge(double threshold = 0.6) : threshold_(threshold) {}
    bool supported(std::string_view claim, const std::vector<std::string>& contexts) override;

  private:
    double threshold_;
};

/// Asks the backend's judge stage; the reply must start with "supported" or "unsupported".
class BackendClaimJudge final : public ClaimJudge {
  public:
    BackendClaimJudge(llm::Backend& backend, const llm::TemplateSet& templates)
        : backend_(backend), templates_(templates) {}
    bool supported(std::string_view claim, const std::vector<std::string>& contexts) override;

  private:
    llm::Backend& backend_;
    const llm::TemplateSet& templates_;
};

/// Supported claims over total claims, claims being sentences. std::nullopt
/// without contexts. Throws agri::EmptyAnswer.
[[nodiscard]] std::optional<double> score_faithfulness(std::string_view answer,
                                                       const std::vector<std::string>& contexts, ClaimJudge& judge);

/// Share of the query's distinct content words present in the answer.
/// std::nullopt for a query without content words. Throws agri::EmptyAnswer.
[[nodiscard]] std::optional<double> score_relevance(std::string_view answer, std::string_view query);

struct GroundingCell {
    Tier tier = Tier::easy;
    double relevance = 0.0;
    double faithfulness = 0.0;
    std::size_t relevance_n = 0;
    std::size_t faithfulness_n = 0;
};

struct GroundingReport {
    std::vector<GroundingCell> tiers;
};

[[nodiscard]] GroundingReport run_grounding(AnswerSource& source, const std::vector<BenchmarkItem>& items,
                                            ClaimJudge& judge);

// ---------------------------------------------------------------------------
// Latency
// ---------------------------------------------------------------------------

struct LatencyReport {
    std::size_t n = 0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double p99_ms = 0.0;
    double max_ms = 0.0;
    double mean_ms = 0.0;
    std::vector<double> samples_ms;
};

/// Answers items one at a time, timing each call with `clock`. Throws
/// std::invalid_argument for an empty item list.
[[nodiscard]] LatencyReport measure_latency(AnswerSource& source, const std::vector<BenchmarkItem>& items,
                                            const TimeSource& clock);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

enum class ReportFormat : std::uint8_t { table, csv };

[[nodiscard]] ReportFormat parse_report_format(std::string_view s);

/// csv: header "tier,dimension,mean,ci_half_width,n_runs" and one row per cell.
[[nodiscard]] std::string render_report(const JuryReport& report, ReportFormat format);
/// csv: header "tier,relevance,faithfulness,n".
[[nodiscard]] std::string render_report(const GroundingReport& report, ReportFormat format);
[[nodiscard]] std::string render_report(const LatencyReport& report, ReportFormat format);

} // namespace agri::eval
