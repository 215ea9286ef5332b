#include "agri/eval.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "agri/orchestrator.hpp"
#include "agri/text.hpp"

namespace agri::eval {

using nlohmann::json;

std::string_view tier_name(Tier t) {
    switch (t) {
    case Tier::easy: return "easy";
    case Tier::medium: return "medium";
    case Tier::hard: return "hard";
    }
    return "easy";
}

Tier parse_tier(std::string_view s) {
    for (auto t : kTiers) {
        if (tier_name(t) == s) {
            return t;
        }
    }
    throw std::invalid_argument(fmt::format("unknown tier '{}'", s));
}

std::string_view dimension_name(Dimension d) {
    switch (d) {
    case Dimension::correctness: return "correctness";
    case Dimension::coherence: return "coherence";
    case Dimension::relevance: return "relevance";
    case Dimension::conciseness: return "conciseness";
    }
    return "correctness";
}

Dimension parse_dimension(std::string_view s) {
    for (auto d : kDimensions) {
        if (dimension_name(d) == s) {
            return d;
        }
    }
    throw std::invalid_argument(fmt::format("unknown dimension '{}'", s));
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

json to_json(const BenchmarkItem& item) {
    json readings = json::array();
    for (const auto& r : item.sensor_context.readings) {
        readings.push_back(agri::to_json(r));
    }
    json ctx{{"readings", readings},
             {"forecast", item.sensor_context.forecast ? feeds::to_json(*item.sensor_context.forecast) : json(nullptr)}};
    return {{"id", item.id},       {"crop", item.crop},   {"tier", tier_name(item.tier)},
            {"query", item.query}, {"sensor_context", ctx}, {"expected_facets", item.expected_facets}};
}

BenchmarkItem item_from_json(const json& j) {
    BenchmarkItem item;
    item.id = j.at("id").get<std::string>();
    item.crop = j.at("crop").get<std::string>();
    item.tier = parse_tier(j.at("tier").get<std::string>());
    item.query = j.at("query").get<std::string>();
    if (j.contains("sensor_context") && !j.at("sensor_context").is_null()) {
        const auto& ctx = j.at("sensor_context");
        for (const auto& r : ctx.value("readings", json::array())) {
            item.sensor_context.readings.push_back(reading_from_json(r));
        }
        if (ctx.contains("forecast") && !ctx.at("forecast").is_null()) {
            item.sensor_context.forecast = feeds::forecast_from_json(ctx.at("forecast"));
        }
    }
    item.expected_facets = j.value("expected_facets", std::vector<std::string>{});
    if (item.id.empty() || item.query.empty()) {
        throw std::invalid_argument("benchmark item needs an id and a query");
    }
    return item;
}

void check_shape(const std::vector<BenchmarkItem>& items) {
    std::map<std::pair<std::string, Tier>, std::size_t> counts;
    std::set<std::string> ids;
    std::vector<std::string> duplicates;
    for (const auto& it : items) {
        if (!ids.insert(it.id).second) {
            duplicates.push_back(it.id);
        }
        ++counts[{it.crop, it.tier}];
    }
    bool ok = duplicates.empty() && items.size() == kBenchmarkCrops.size() * kTiers.size() * kItemsPerCell;
    std::string found;
    for (auto crop : kBenchmarkCrops) {
        for (auto t : kTiers) {
            auto it = counts.find({std::string(crop), t});
            const std::size_t n = it == counts.end() ? 0 : it->second;
            ok = ok && n == kItemsPerCell;
            found += fmt::format("{}{}/{}={}", found.empty() ? "" : ", ", crop, tier_name(t), n);
        }
    }
    for (const auto& [key, n] : counts) {
        if (std::find(kBenchmarkCrops.begin(), kBenchmarkCrops.end(), key.first) == kBenchmarkCrops.end()) {
            ok = false;
            found += fmt::format(", {}/{}={}", key.first, tier_name(key.second), n);
        }
    }
    if (!ok) {
        std::string dup;
        for (const auto& d : duplicates) {
            dup += (dup.empty() ? "" : ", ") + d;
        }
        throw ShapeError(fmt::format("benchmark shape mismatch: {} items [{}]{}", items.size(), found,
                                     dup.empty() ? "" : "; duplicate ids: " + dup));
    }
}

std::vector<BenchmarkItem> parse_benchmark(std::string_view ndjson, bool enforce_shape) {
    std::vector<BenchmarkItem> items;
    std::size_t line_no = 0;
    for (const auto& line : text::split(ndjson, '\n')) {
        ++line_no;
        if (text::trim(line).empty()) {
            continue;
        }
        try {
            items.push_back(item_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw ShapeError(fmt::format("benchmark line {}: {}", line_no, e.what()));
        }
    }
    if (enforce_shape) {
        check_shape(items);
    }
    return items;
}

std::vector<BenchmarkItem> load_benchmark(const std::filesystem::path& path, bool enforce_shape) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open benchmark {}", path.string()));
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_benchmark(ss.str(), enforce_shape);
}

// ---------------------------------------------------------------------------
// Pipeline answers
// ---------------------------------------------------------------------------

Answer PipelineAnswerSource::answer(const BenchmarkItem& item) {
    store::Store store;
    FarmProfile profile;
    profile.phone = "+920000000001";
    profile.language = fx_.language;
    profile.crops = {item.crop};
    profile.location = item.sensor_context.forecast ? item.sensor_context.forecast->location : Location{31.5, 74.3};
    profile.active = true;
    profile = store.add_farm(profile);

    Timestamp now = 1760000000;
    std::set<std::string> nodes;
    for (const auto& r : item.sensor_context.readings) {
        if (nodes.insert(r.node_id).second) {
            store.attach_node(r.node_id, profile.farm_id);
        }
        store.append_reading(profile.farm_id, r);
    }
    if (!item.sensor_context.readings.empty()) {
        Timestamp newest = 0;
        for (const auto& r : item.sensor_context.readings) {
            newest = std::max(newest, r.timestamp);
        }
        now = newest + 60;
    } else if (item.sensor_context.forecast) {
        now = parse_date(item.sensor_context.forecast->issued_at) + 8 * kSecondsPerHour;
    }

    feeds::StaticProvider feeds;
    if (item.sensor_context.forecast) {
        feeds.set_forecast(*item.sensor_context.forecast);
    }
    pipeline::OrchestratorDeps deps{store,
                                    item.sensor_context.forecast ? &feeds : nullptr,
                                    &fx_.retriever,
                                    fx_.backend,
                                    fx_.translator,
                                    fx_.templates,
                                    fx_.intent,
                                    fx_.time};
    pipeline::Orchestrator orchestrator(deps);

    std::string question = item.query;
    if (fx_.language != Language::en) {
        question = fx_.translator.translate(item.query, Language::en, fx_.language);
    }
    auto reply = orchestrator.handle(profile, question, now);

    Answer a;
    a.text = reply.text_en;
    a.contexts = reply.contexts;
    a.citations = reply.citations;
    a.consumed_sensor = reply.consumed_sensor;
    a.grounded = reply.grounded;
    a.fallback = reply.fallback;
    a.status = reply.status;
    a.citations_resolve = std::all_of(reply.citations.begin(), reply.citations.end(), [&](const Citation& c) {
        return pipeline::citation_resolves(c, store, profile.farm_id, &fx_.retriever, item.sensor_context.forecast);
    });
    return a;
}

// ---------------------------------------------------------------------------
// Judges
// ---------------------------------------------------------------------------

namespace {

double coverage(const std::vector<std::string>& words, const std::set<std::string>& vocabulary) {
    if (words.empty()) {
        return 1.0;
    }
    std::size_t hit = 0;
    for (const auto& w : words) {
        hit += vocabulary.count(w);
    }
    return static_cast<double>(hit) / static_cast<double>(words.size());
}

std::set<std::string> vocabulary(std::string_view s) {
    auto toks = text::tokenize(s);
    return {toks.begin(), toks.end()};
}

std::vector<std::string> unique_content_words(std::string_view s) {
    std::vector<std::string> out;
    for (auto& w : text::content_words(s)) {
        if (std::find(out.begin(), out.end(), w) == out.end()) {
            out.push_back(std::move(w));
        }
    }
    return out;
}

json parse_json_object(const std::string& raw) {
    auto open = raw.find('{');
    auto close = raw.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw JudgeUnavailable("judge reply holds no JSON object");
    }
    try {
        return json::parse(raw.substr(open, close - open + 1));
    } catch (const json::exception& e) {
        throw JudgeUnavailable(fmt::format("judge reply is not JSON: {}", e.what()));
    }
}

std::string joined_contexts(const std::vector<std::string>& contexts) {
    std::string out;
    for (const auto& c : contexts) {
        out += "- " + c + "\n";
    }
    return text::trim(out);
}

} // namespace

DimensionScores LexicalJudge::score(const BenchmarkItem& item, const Answer& answer) {
    DimensionScores s{};
    const auto vocab = vocabulary(answer.text);
    if (item.expected_facets.empty()) {
        s[0] = answer.text.empty() ? 0.0 : 100.0;
    } else {
        std::size_t met = 0;
        for (const auto& facet : item.expected_facets) {
            if (coverage(unique_content_words(facet), vocab) >= facet_threshold_) {
                ++met;
            }
        }
        s[0] = 100.0 * static_cast<double>(met) / static_cast<double>(item.expected_facets.size());
    }

    const auto sentences = text::split_sentences(answer.text);
    if (!sentences.empty()) {
        std::size_t good = 0;
        for (const auto& sentence : sentences) {
            const char last = sentence.back();
            if (text::tokenize(sentence).size() >= 3 && (last == '.' || last == '!' || last == '?')) {
                ++good;
            }
        }
        s[1] = 100.0 * static_cast<double>(good) / static_cast<double>(sentences.size());
    }

    if (!text::trim(answer.text).empty()) {
        s[2] = 100.0 * score_relevance(answer.text, item.query).value_or(1.0);
    }

    const auto words = text::tokenize(answer.text).size();
    if (words > 0) {
        s[3] = words <= word_budget_ ? 100.0
                                     : 100.0 * static_cast<double>(word_budget_) / static_cast<double>(words);
    }
    return s;
}

DimensionScores BackendJudge::score(const BenchmarkItem& item, const Answer& answer) {
    llm::TemplateVars vars{{"query", item.query},
                           {"answer", answer.text},
                           {"contexts", joined_contexts(answer.contexts)},
                           {"claim", ""}};
    std::string facets;
    for (const auto& f : item.expected_facets) {
        facets += "- " + f + "\n";
    }
    vars["facets"] = text::trim(facets);
    std::string raw;
    try {
        raw = backend_.complete(templates_.render(llm::Stage::judge, vars));
    } catch (const RetryableError& e) {
        throw JudgeUnavailable(fmt::format("{}: {}", name_, e.what()));
    }
    auto j = parse_json_object(raw);
    DimensionScores s{};
    for (auto d : kDimensions) {
        const auto key = std::string(dimension_name(d));
        if (!j.contains(key) || !j.at(key).is_number()) {
            throw JudgeUnavailable(fmt::format("{}: missing score '{}'", name_, key));
        }
        const double v = j.at(key).get<double>();
        if (v < 0.0 || v > 100.0) {
            throw JudgeUnavailable(fmt::format("{}: score {} outside [0, 100]", name_, v));
        }
        s[static_cast<std::size_t>(d)] = v;
    }
    return s;
}

std::vector<std::unique_ptr<Judge>> default_mock_jury() {
    std::vector<std::unique_ptr<Judge>> jury;
    jury.push_back(std::make_unique<LexicalJudge>("lexical-a", 0.5, 160));
    jury.push_back(std::make_unique<LexicalJudge>("lexical-b", 0.6, 120));
    jury.push_back(std::make_unique<LexicalJudge>("lexical-c", 0.7, 100));
    jury.push_back(std::make_unique<LexicalJudge>("lexical-d", 0.8, 80));
    return jury;
}

// ---------------------------------------------------------------------------
// Suite
// ---------------------------------------------------------------------------

json to_json(const ScoreRecord& r) {
    return {{"run", r.run},
            {"judge", r.judge},
            {"item_id", r.item_id},
            {"tier", tier_name(r.tier)},
            {"dimension", dimension_name(r.dimension)},
            {"score", r.score}};
}

ScoreRecord record_from_json(const json& j) {
    ScoreRecord r;
    r.run = j.at("run").get<int>();
    r.judge = j.at("judge").get<std::string>();
    r.item_id = j.at("item_id").get<std::string>();
    r.tier = parse_tier(j.at("tier").get<std::string>());
    r.dimension = parse_dimension(j.at("dimension").get<std::string>());
    r.score = j.at("score").get<double>();
    if (r.score < 0.0 || r.score > 100.0) {
        throw std::invalid_argument(fmt::format("score {} outside [0, 100]", r.score));
    }
    return r;
}

const CellStat& JuryReport::cell(Tier t, Dimension d) const {
    for (const auto& c : cells) {
        if (c.tier == t && c.dimension == d) {
            return c;
        }
    }
    throw std::out_of_range("report cell missing");
}

CellStat cell_from_run_means(Tier t, Dimension d, std::vector<double> run_means) {
    CellStat c;
    c.tier = t;
    c.dimension = d;
    c.run_means = std::move(run_means);
    if (!c.run_means.empty()) {
        c.ci = stats::mean_ci(c.run_means, 0.95);
    }
    return c;
}

JuryReport aggregate(const std::vector<ScoreRecord>& records) {
    JuryReport report;
    report.records = records.size();
    std::set<int> runs;
    // (tier, dim, run) -> (sum, n)
    std::map<std::tuple<Tier, Dimension, int>, std::pair<double, std::size_t>> cell_sums;
    std::map<std::string, std::map<std::pair<Tier, Dimension>, std::pair<double, std::size_t>>> judge_sums;
    for (const auto& r : records) {
        runs.insert(r.run);
        auto& c = cell_sums[{r.tier, r.dimension, r.run}];
        c.first += r.score;
        ++c.second;
        auto& j = judge_sums[r.judge][{r.tier, r.dimension}];
        j.first += r.score;
        ++j.second;
    }
    report.runs = static_cast<int>(runs.size());
    for (auto t : kTiers) {
        for (auto d : kDimensions) {
            std::vector<double> means;
            for (int run : runs) {
                auto it = cell_sums.find({t, d, run});
                if (it != cell_sums.end() && it->second.second > 0) {
                    means.push_back(it->second.first / static_cast<double>(it->second.second));
                }
            }
            report.cells.push_back(cell_from_run_means(t, d, std::move(means)));
        }
    }
    for (const auto& [judge, sums] : judge_sums) {
        std::array<DimensionScores, 3> table{};
        for (const auto& [key, sum] : sums) {
            table[static_cast<std::size_t>(key.first)][static_cast<std::size_t>(key.second)] =
                sum.first / static_cast<double>(sum.second);
        }
        report.per_judge[judge] = table;
    }
    return report;
}

JuryReport run_suite(AnswerSource& source, const std::vector<BenchmarkItem>& items, const std::vector<Judge*>& judges,
                     int runs, std::vector<ScoreRecord>* records_out) {
    if (runs < 1) {
        throw std::invalid_argument("runs must be at least 1");
    }
    std::vector<ScoreRecord> records;
    std::vector<std::string> skipped;
    records.reserve(items.size() * judges.size() * static_cast<std::size_t>(runs) * kDimensions.size());
    for (int run = 1; run <= runs; ++run) {
        for (const auto& item : items) {
            const auto answer = source.answer(item);
            for (auto* judge : judges) {
                try {
                    const auto scores = judge->score(item, answer);
                    for (auto d : kDimensions) {
                        records.push_back(
                            {run, judge->name(), item.id, item.tier, d, scores[static_cast<std::size_t>(d)]});
                    }
                } catch (const JudgeUnavailable& e) {
                    skipped.push_back(fmt::format("{}/{}/{}: {}", run, item.id, judge->name(), e.what()));
                }
            }
        }
    }
    auto report = aggregate(records);
    report.runs = runs;
    report.skipped = std::move(skipped);
    if (records_out != nullptr) {
        *records_out = std::move(records);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Grounding scores
// ---------------------------------------------------------------------------

bool LexicalClaimJudge::supported(std::string_view claim, const std::vector<std::string>& contexts) {
    const auto words = unique_content_words(claim);
    return std::any_of(contexts.begin(), contexts.end(),
                       [&](const std::string& ctx) { return coverage(words, vocabulary(ctx)) >= threshold_; });
}

bool BackendClaimJudge::supported(std::string_view claim, const std::vector<std::string>& contexts) {
    llm::TemplateVars vars{{"query", ""},
                           {"answer", ""},
                           {"facets", ""},
                           {"claim", std::string(claim)},
                           {"contexts", joined_contexts(contexts)}};
    std::string raw;
    try {
        raw = text::to_lower(text::trim(backend_.complete(templates_.render(llm::Stage::judge, vars))));
    } catch (const RetryableError& e) {
        throw JudgeUnavailable(e.what());
    }
    if (text::starts_with(raw, "unsupported")) {
        return false;
    }
    if (text::starts_with(raw, "supported")) {
        return true;
    }
    throw JudgeUnavailable(fmt::format("unexpected claim verdict '{}'", raw.substr(0, 40)));
}

std::optional<double> score_faithfulness(std::string_view answer, const std::vector<std::string>& contexts,
                                         ClaimJudge& judge) {
    if (text::trim(answer).empty()) {
        throw EmptyAnswer("empty answer");
    }
    if (contexts.empty()) {
        return std::nullopt;
    }
    std::size_t claims = 0;
    std::size_t supported = 0;
    for (const auto& sentence : text::split_sentences(answer)) {
        if (text::content_words(sentence).empty()) {
            continue;
        }
        ++claims;
        if (judge.supported(sentence, contexts)) {
            ++supported;
        }
    }
    if (claims == 0) {
        return 1.0;
    }
    return static_cast<double>(supported) / static_cast<double>(claims);
}

std::optional<double> score_relevance(std::string_view answer, std::string_view query) {
    if (text::trim(answer).empty()) {
        throw EmptyAnswer("empty answer");
    }
    const auto words = unique_content_words(query);
    if (words.empty()) {
        return std::nullopt;
    }
    return coverage(words, vocabulary(answer));
}

GroundingReport run_grounding(AnswerSource& source, const std::vector<BenchmarkItem>& items, ClaimJudge& judge) {
    std::map<Tier, GroundingCell> cells;
    for (auto t : kTiers) {
        cells[t].tier = t;
    }
    for (const auto& item : items) {
        const auto a = source.answer(item);
        auto& cell = cells[item.tier];
        if (text::trim(a.text).empty()) {
            continue;
        }
        if (auto r = score_relevance(a.text, item.query)) {
            cell.relevance += *r;
            ++cell.relevance_n;
        }
        if (auto f = score_faithfulness(a.text, a.contexts, judge)) {
            cell.faithfulness += *f;
            ++cell.faithfulness_n;
        }
    }
    GroundingReport report;
    for (auto t : kTiers) {
        auto c = cells[t];
        if (c.relevance_n > 0) {
            c.relevance /= static_cast<double>(c.relevance_n);
        }
        if (c.faithfulness_n > 0) {
            c.faithfulness /= static_cast<double>(c.faithfulness_n);
        }
        report.tiers.push_back(c);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Latency
// ---------------------------------------------------------------------------

LatencyReport measure_latency(AnswerSource& source, const std::vector<BenchmarkItem>& items,
                              const TimeSource& clock) {
    if (items.empty()) {
        throw std::invalid_argument("latency measurement needs at least one item");
    }
    LatencyReport r;
    for (const auto& item : items) {
        const double start = clock.now();
        (void)source.answer(item);
        r.samples_ms.push_back((clock.now() - start) * 1000.0);
    }
    r.n = r.samples_ms.size();
    r.p50_ms = stats::percentile(r.samples_ms, 50);
    r.p95_ms = stats::percentile(r.samples_ms, 95);
    r.p99_ms = stats::percentile(r.samples_ms, 99);
    r.max_ms = *std::max_element(r.samples_ms.begin(), r.samples_ms.end());
    r.mean_ms = stats::mean(r.samples_ms);
    return r;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

ReportFormat parse_report_format(std::string_view s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "table") return ReportFormat::table;
    throw std::invalid_argument(fmt::format("unknown report format '{}'", s));
}

std::string render_report(const JuryReport& report, ReportFormat format) {
    std::string out;
    if (format == ReportFormat::csv) {
        out = "tier,dimension,mean,ci_half_width,n_runs\n";
        for (auto t : kTiers) {
            for (auto d : kDimensions) {
                const auto& c = report.cell(t, d);
                out += fmt::format("{},{},{:.2f},{:.2f},{}\n", tier_name(t), dimension_name(d), c.ci.mean,
                                   c.ci.half_width, c.run_means.size());
            }
        }
        return out;
    }
    out += fmt::format("{:<8}", "tier");
    for (auto d : kDimensions) {
        out += fmt::format("  {:>18}", dimension_name(d));
    }
    out += "\n";
    for (auto t : kTiers) {
        out += fmt::format("{:<8}", tier_name(t));
        for (auto d : kDimensions) {
            const auto& c = report.cell(t, d);
            out += fmt::format("  {:>18}", fmt::format("{:.2f} ± {:.2f}", c.ci.mean, c.ci.half_width));
        }
        out += "\n";
    }
    out += fmt::format("runs: {}  records: {}  skipped: {}\n", report.runs, report.records, report.skipped.size());
    if (!report.per_judge.empty()) {
        out += "\nper judge (mean over runs)\n";
        for (const auto& [judge, table] : report.per_judge) {
            for (auto t : kTiers) {
                out += fmt::format("{:<12}{:<8}", judge, tier_name(t));
                for (auto d : kDimensions) {
                    out += fmt::format("  {:>18.2f}", table[static_cast<std::size_t>(t)][static_cast<std::size_t>(d)]);
                }
                out += "\n";
            }
        }
    }
    return out;
}

std::string render_report(const GroundingReport& report, ReportFormat format) {
    std::string out;
    if (format == ReportFormat::csv) {
        out = "tier,relevance,faithfulness,n\n";
        for (const auto& c : report.tiers) {
            out += fmt::format("{},{:.4f},{:.4f},{}\n", tier_name(c.tier), c.relevance, c.faithfulness,
                               c.relevance_n);
        }
        return out;
    }
    out = fmt::format("{:<8}  {:>10}  {:>12}  {:>4}\n", "tier", "relevance", "faithfulness", "n");
    for (const auto& c : report.tiers) {
        out += fmt::format("{:<8}  {:>9.1f}%  {:>11.1f}%  {:>4}\n", tier_name(c.tier), 100.0 * c.relevance,
                           100.0 * c.faithfulness, c.relevance_n);
    }
    out += "claims are sentences; support judged by content-word overlap\n";
    return out;
}

std::string render_report(const LatencyReport& report, ReportFormat format) {
    if (format == ReportFormat::csv) {
        return fmt::format("n,p50_ms,p95_ms,p99_ms,max_ms,mean_ms\n{},{:.3f},{:.3f},{:.3f},{:.3f},{:.3f}\n", report.n,
                           report.p50_ms, report.p95_ms, report.p99_ms, report.max_ms, report.mean_ms);
    }
    return fmt::format("items: {}\np50: {:.3f} ms\np95: {:.3f} ms\np99: {:.3f} ms\nmax: {:.3f} ms\nmean: {:.3f} ms\n",
                       report.n, report.p50_ms, report.p95_ms, report.p99_ms, report.max_ms, report.mean_ms);
}

} // namespace agri::eval
