#include <cmath>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "agri/errors.hpp"
#include "agri/eval.hpp"
#include "agri/text.hpp"
#include "support.hpp"

using namespace agri;
using namespace agri::eval;

namespace {

BenchmarkItem item(std::string id, std::string crop, Tier tier, std::string query = "When should I irrigate maize?",
                   std::vector<std::string> facets = {}) {
    BenchmarkItem i;
    i.id = std::move(id);
    i.crop = std::move(crop);
    i.tier = tier;
    i.query = std::move(query);
    i.expected_facets = std::move(facets);
    return i;
}

std::vector<BenchmarkItem> full_grid() {
    std::vector<BenchmarkItem> items;
    for (auto crop : kBenchmarkCrops) {
        for (auto tier : kTiers) {
            for (std::size_t k = 0; k < kItemsPerCell; ++k) {
                items.push_back(item(fmt::format("{}-{}-{:02}", crop, tier_name(tier), k + 1), std::string(crop), tier));
            }
        }
    }
    return items;
}

Answer answer_of(std::string text) {
    Answer a;
    a.text = std::move(text);
    return a;
}

class CannedSource final : public AnswerSource {
  public:
    explicit CannedSource(Answer a) : a_(std::move(a)) {}
    Answer answer(const BenchmarkItem&) override {
        ++calls;
        return a_;
    }
    int calls = 0;

  private:
    Answer a_;
};

// Scores every dimension with the value assigned to the current run.
class PerRunJudge final : public Judge {
  public:
    PerRunJudge(std::vector<double> per_run, std::size_t items) : per_run_(std::move(per_run)), items_(items) {}
    [[nodiscard]] std::string name() const override { return "per-run"; }
    DimensionScores score(const BenchmarkItem&, const Answer&) override {
        const double v = per_run_[calls_++ / items_];
        return {v, v, v, v};
    }

  private:
    std::vector<double> per_run_;
    std::size_t items_;
    std::size_t calls_ = 0;
};

class FlakyJudge final : public Judge {
  public:
    [[nodiscard]] std::string name() const override { return "flaky"; }
    DimensionScores score(const BenchmarkItem& i, const Answer&) override {
        if (i.id.back() == '1') {
            throw JudgeUnavailable("timeout");
        }
        return {50, 50, 50, 50};
    }
};

// Two-sided 95% Student t for df = 2 in closed form.
double t_975_df2() {
    const double p = 0.975;
    return (2 * p - 1) * std::sqrt(2.0 / (4 * p * (1 - p)));
}

} // namespace

TEST(Benchmark, ShippedFileHasExpectedShape) {
    const auto items = load_benchmark(fx::data_dir() / "benchmark" / "benchmark.jsonl");
    EXPECT_EQ(items.size(), 99u);
    for (const auto& i : items) {
        EXPECT_FALSE(i.query.empty());
        EXPECT_EQ(item_from_json(to_json(i)).id, i.id);
    }
}

TEST(Benchmark, ShapeErrors) {
    auto items = full_grid();
    EXPECT_NO_THROW(check_shape(items));
    auto short_cell = items;
    short_cell.pop_back();
    try {
        check_shape(short_cell);
        FAIL();
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("10"), std::string::npos);
    }
    auto dup = items;
    dup[1].id = dup[0].id;
    EXPECT_THROW(check_shape(dup), ShapeError);
    auto wrong_crop = items;
    wrong_crop[0].crop = "rice";
    EXPECT_THROW(check_shape(wrong_crop), ShapeError);
}

TEST(Suite, ConstantJudgeGivesExactMeansAndZeroWidth) {
    const auto items = full_grid();
    CannedSource source({"Irrigate maize in the morning.", {}, {}, false});
    ConstantJudge judge("constant", 90);
    std::vector<ScoreRecord> records;
    const auto report = run_suite(source, items, {&judge}, 3, &records);
    EXPECT_EQ(source.calls, 3 * 99);
    EXPECT_EQ(records.size(), 3u * 99u * 4u);
    EXPECT_EQ(report.runs, 3);
    ASSERT_EQ(report.cells.size(), 12u);
    std::size_t i = 0;
    for (auto t : kTiers) {
        for (auto d : kDimensions) {
            const auto& c = report.cells[i++];
            EXPECT_EQ(c.tier, t);
            EXPECT_EQ(c.dimension, d);
            EXPECT_EQ(c.ci.mean, 90.0);
            EXPECT_EQ(c.ci.half_width, 0.0);
            EXPECT_EQ(c.run_means.size(), 3u);
        }
    }
}

TEST(Suite, RunMeansEightyNinetyHundred) {
    const auto items = full_grid();
    CannedSource source(answer_of("text"));
    PerRunJudge judge({80, 90, 100}, items.size());
    const auto report = run_suite(source, items, {&judge}, 3);
    const double want = t_975_df2() * 10.0 / std::sqrt(3.0);
    EXPECT_NEAR(want, 24.84, 0.01);
    for (const auto& c : report.cells) {
        EXPECT_DOUBLE_EQ(c.ci.mean, 90.0);
        EXPECT_NEAR(c.ci.half_width, want, 1e-6);
        EXPECT_EQ(c.run_means, (std::vector<double>{80, 90, 100}));
    }
    EXPECT_NEAR(report.cell(Tier::hard, Dimension::conciseness).ci.half_width, 24.84, 0.01);
}

TEST(Suite, UnavailableJudgeSkippedAndReported) {
    const auto items = full_grid();
    CannedSource source(answer_of("text"));
    FlakyJudge flaky;
    ConstantJudge steady("steady", 70);
    const auto report = run_suite(source, items, {&flaky, &steady}, 2);
    EXPECT_FALSE(report.skipped.empty());
    EXPECT_EQ(report.per_judge.at("steady")[0][0], 70.0);
    EXPECT_EQ(report.per_judge.at("flaky")[2][3], 50.0);
    EXPECT_THROW((void)run_suite(source, items, {&steady}, 0), std::invalid_argument);
}

TEST(Suite, AggregateMatchesRecords) {
    std::vector<ScoreRecord> records{{1, "a", "x", Tier::easy, Dimension::coherence, 60},
                                     {1, "b", "x", Tier::easy, Dimension::coherence, 80},
                                     {2, "a", "x", Tier::easy, Dimension::coherence, 90}};
    const auto report = aggregate(records);
    const auto& c = report.cell(Tier::easy, Dimension::coherence);
    EXPECT_EQ(c.run_means, (std::vector<double>{70, 90}));
    EXPECT_DOUBLE_EQ(c.ci.mean, 80.0);
    EXPECT_EQ(record_from_json(to_json(records[1])).score, 80.0);
}

TEST(Report, CsvLayout) {
    const auto items = full_grid();
    CannedSource source(answer_of("text"));
    ConstantJudge judge("c", 90);
    const auto csv = render_report(run_suite(source, items, {&judge}, 3), ReportFormat::csv);
    const auto lines = text::split(text::trim(csv), '\n');
    ASSERT_EQ(lines.size(), 13u);
    EXPECT_EQ(lines[0], "tier,dimension,mean,ci_half_width,n_runs");
    EXPECT_EQ(lines[1], "easy,correctness,90.00,0.00,3");
    EXPECT_EQ(lines[12], "hard,conciseness,90.00,0.00,3");
    EXPECT_EQ(parse_report_format("csv"), ReportFormat::csv);
}

TEST(Lexical, JudgeDimensions) {
    LexicalJudge judge("lex", 0.6, 10);
    auto i = item("m", "maize", Tier::easy, "When should I irrigate maize?", {"irrigate early morning", "check soil moisture"});
    Answer a;
    a.text = "Irrigate the maize early in the morning. Soil moisture is fine.";
    const auto s = judge.score(i, a);
    EXPECT_DOUBLE_EQ(s[0], 100.0);
    EXPECT_DOUBLE_EQ(s[1], 100.0);
    EXPECT_DOUBLE_EQ(s[2], 100.0);
    EXPECT_DOUBLE_EQ(s[3], 100.0 * 10 / 11);
    a.text = "Sell the crop";
    const auto t = judge.score(i, a);
    EXPECT_DOUBLE_EQ(t[0], 0.0);
    EXPECT_DOUBLE_EQ(t[1], 0.0);
    EXPECT_EQ(default_mock_jury().size(), 4u);
}

TEST(Grounding, FaithfulnessOfContextIsOne) {
    LexicalClaimJudge judge;
    const std::vector<std::string> contexts{"Latest soil moisture is 30%. Irrigate cotton within a day.",
                                            "Lime raises the pH of acid soil."};
    std::string concatenated;
    for (const auto& c : contexts) {
        concatenated += c + " ";
    }
    EXPECT_DOUBLE_EQ(*score_faithfulness(concatenated, contexts, judge), 1.0);
    EXPECT_DOUBLE_EQ(*score_faithfulness("Lime raises the pH. Harvest bananas in winter.", contexts, judge), 0.5);
    EXPECT_FALSE(score_faithfulness("anything", {}, judge));
    EXPECT_THROW((void)score_faithfulness("  ", contexts, judge), EmptyAnswer);
}

TEST(Grounding, Relevance) {
    EXPECT_DOUBLE_EQ(*score_relevance("Irrigate maize now.", "When should I irrigate maize?"), 1.0);
    EXPECT_DOUBLE_EQ(*score_relevance("Irrigate now.", "irrigate maize"), 0.5);
    EXPECT_FALSE(score_relevance("x", "the of"));
    EXPECT_THROW((void)score_relevance("", "irrigate"), EmptyAnswer);
}

TEST(Latency, PercentilesFromClock) {
    // Each answer advances the virtual clock by a growing step.
    class Slow final : public AnswerSource {
      public:
        explicit Slow(VirtualTimeSource& t) : t_(t) {}
        Answer answer(const BenchmarkItem&) override {
            t_.advance(0.001 * static_cast<double>(++n_));
            return answer_of("ok");
        }

      private:
        VirtualTimeSource& t_;
        int n_ = 0;
    };
    VirtualTimeSource clock;
    Slow source(clock);
    std::vector<BenchmarkItem> items(100, item("x", "maize", Tier::easy));
    const auto r = measure_latency(source, items, clock);
    EXPECT_EQ(r.n, 100u);
    EXPECT_NEAR(r.p50_ms, 50.0, 1e-6);
    EXPECT_NEAR(r.p99_ms, 99.0, 1e-6);
    EXPECT_NEAR(r.max_ms, 100.0, 1e-6);
    EXPECT_THROW((void)measure_latency(source, {}, clock), std::invalid_argument);
}

TEST(Pipeline, DeterministicAnswersOnBenchmark) {
    auto items = load_benchmark(fx::data_dir() / "benchmark" / "benchmark.jsonl");
    items.resize(12);
    auto kb = std::make_unique<kb::KnowledgeBase>();
    kb->ingest_all(kb::load_corpus(fx::data_dir() / "kb" / "corpus"));
    auto mock = llm::MockBackend::load(fx::data_dir() / "mock" / "rules.json");
    llm::MockTranslator tr;
    const auto templates = llm::TemplateSet::load(fx::data_dir() / "prompts");
    auto intent = pipeline::RuleIntentParser::load(fx::data_dir() / "intent_rules.json");
    VirtualTimeSource time;
    PipelineAnswerSource a({*kb, mock, tr, templates, intent, time});
    PipelineAnswerSource b({*kb, mock, tr, templates, intent, time});
    for (const auto& i : items) {
        const auto x = a.answer(i);
        const auto y = b.answer(i);
        EXPECT_EQ(x.text, y.text);
        EXPECT_EQ(x.citations, y.citations);
        EXPECT_FALSE(x.status) << i.id;
        if (x.consumed_sensor) {
            EXPECT_FALSE(x.citations.empty()) << i.id;
            EXPECT_TRUE(x.citations_resolve) << i.id;
        }
        EXPECT_TRUE(x.grounded) << i.id;
    }
}
