// Evaluation harness: jury scoring, grounding scores and latency over the benchmark.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "agri/app.hpp"
#include "agri/eval.hpp"

namespace {

namespace fs = std::filesystem;
using namespace agri;

// The system under test: full pipeline on mock (or configured) backends
// without feeds beyond each item's own forecast.
struct System {
    explicit System(app::AppConfig cfg) : rt([&] {
        cfg.feeds_kind = "none";
        cfg.workers = 0;
        return cfg;
    }()) {}

    eval::PipelineAnswerSource source() {
        return eval::PipelineAnswerSource({rt.knowledge(), rt.backend(), rt.translator(), rt.templates(), rt.intent(),
                                           rt.time()});
    }

    app::Runtime rt;
};

struct Jury {
    std::vector<std::unique_ptr<eval::Judge>> owned;
    std::vector<std::unique_ptr<app::Runtime>> runtimes;
};

// "mock", "constant:<score>" or "remote:<config.json>", comma separated.
Jury make_jury(const std::string& spec, const app::AppConfig& base) {
    Jury jury;
    std::size_t start = 0;
    while (start <= spec.size()) {
        const auto end = std::min(spec.find(',', start), spec.size());
        const auto item = spec.substr(start, end - start);
        start = end + 1;
        if (item.empty()) {
            continue;
        }
        if (item == "mock") {
            for (auto& j : eval::default_mock_jury()) {
                jury.owned.push_back(std::move(j));
            }
        } else if (item.rfind("constant:", 0) == 0) {
            const double v = std::stod(item.substr(9));
            jury.owned.push_back(std::make_unique<eval::ConstantJudge>(fmt::format("const-{}", item.substr(9)), v));
        } else if (item.rfind("remote:", 0) == 0) {
            auto cfg = app::AppConfig::load(item.substr(7));
            cfg.data_dir = base.data_dir;
            cfg.feeds_kind = "none";
            cfg.workers = 0;
            auto rt = std::make_unique<app::Runtime>(cfg);
            jury.owned.push_back(std::make_unique<eval::BackendJudge>(
                fmt::format("{}:{}", cfg.remote.model, jury.owned.size() + 1), rt->backend(), rt->templates()));
            jury.runtimes.push_back(std::move(rt));
        } else {
            throw std::invalid_argument(fmt::format("unknown judge '{}'", item));
        }
    }
    if (jury.owned.empty()) {
        throw std::invalid_argument("no judges given");
    }
    return jury;
}

void write_out(const std::string& path, const std::string& body) {
    if (path.empty() || path == "-") {
        std::cout << body;
        return;
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot write {}", path));
    }
    out << body;
}

eval::ReportFormat format_for(const std::string& out, const std::string& requested) {
    if (!requested.empty()) {
        return eval::parse_report_format(requested);
    }
    return fs::path(out).extension() == ".csv" ? eval::ReportFormat::csv : eval::ReportFormat::table;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Benchmark evaluation harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::string data_dir;
    app.add_option("--config", config_path, "Runtime config JSON for the system under test");
    app.add_option("--data", data_dir, "Data directory");

    std::string benchmark;
    std::string out;
    std::string format;

    auto* run = app.add_subcommand("run", "Score the benchmark with a judge panel");
    std::string judges = "mock";
    int runs = 3;
    std::string records_out;
    run->add_option("--benchmark", benchmark, "Benchmark NDJSON")->required()->check(CLI::ExistingFile);
    run->add_option("--judges", judges, "mock | constant:<score> | remote:<config> (comma separated)");
    run->add_option("--runs", runs)->check(CLI::PositiveNumber);
    run->add_option("--out", out, "Report file (.csv for CSV)");
    run->add_option("--records", records_out, "Write raw score records (NDJSON)");
    run->add_option("--format", format, "table | csv");

    auto* latency = app.add_subcommand("latency", "End-to-end pipeline latency per item");
    latency->add_option("--benchmark", benchmark, "Benchmark NDJSON")->required()->check(CLI::ExistingFile);
    latency->add_option("--out", out, "Report file");
    latency->add_option("--format", format, "table | csv");
    double max_p99_ms = 0.0;
    latency->add_option("--max-p99-ms", max_p99_ms, "Exit non-zero when p99 exceeds this");

    auto* grounding = app.add_subcommand("grounding", "Answer relevance and faithfulness per tier");
    grounding->add_option("--benchmark", benchmark, "Benchmark NDJSON")->required()->check(CLI::ExistingFile);
    grounding->add_option("--out", out, "Report file");
    grounding->add_option("--format", format, "table | csv");
    double claim_threshold = 0.6;
    grounding->add_option("--claim-threshold", claim_threshold, "Lexical claim-support threshold");

    auto* answers = app.add_subcommand("answers", "Dump each item's answer, citations and grounding flags");
    answers->add_option("--benchmark", benchmark, "Benchmark NDJSON")->required()->check(CLI::ExistingFile);
    answers->add_option("--out", out, "Output NDJSON");

    auto* report = app.add_subcommand("report", "Render a report from saved score records");
    std::string records_in;
    report->add_option("--records", records_in, "Score records NDJSON")->required()->check(CLI::ExistingFile);
    report->add_option("--out", out, "Report file");
    report->add_option("--format", format, "table | csv");

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = config_path.empty() ? app::AppConfig{} : app::AppConfig::load(config_path);
        if (!data_dir.empty()) {
            cfg.data_dir = data_dir;
        }

        if (*run) {
            System sys(cfg);
            auto source = sys.source();
            const auto items = eval::load_benchmark(benchmark);
            auto jury = make_jury(judges, cfg);
            std::vector<eval::Judge*> panel;
            for (auto& j : jury.owned) {
                panel.push_back(j.get());
            }
            std::vector<eval::ScoreRecord> records;
            const auto rep = eval::run_suite(source, items, panel, runs, &records);
            if (!records_out.empty()) {
                std::ofstream rec(records_out);
                for (const auto& r : records) {
                    rec << eval::to_json(r).dump() << "\n";
                }
            }
            for (const auto& s : rep.skipped) {
                std::cerr << "skipped: " << s << "\n";
            }
            write_out(out, eval::render_report(rep, format_for(out, format)));
        } else if (*latency) {
            System sys(cfg);
            auto source = sys.source();
            const auto items = eval::load_benchmark(benchmark);
            const auto rep = eval::measure_latency(source, items, sys.rt.time());
            write_out(out, eval::render_report(rep, format_for(out, format)));
            if (max_p99_ms > 0.0 && rep.p99_ms >= max_p99_ms) {
                std::cerr << fmt::format("p99 {:.1f} ms exceeds {:.1f} ms\n", rep.p99_ms, max_p99_ms);
                return 3;
            }
        } else if (*grounding) {
            System sys(cfg);
            auto source = sys.source();
            const auto items = eval::load_benchmark(benchmark);
            eval::LexicalClaimJudge judge(claim_threshold);
            const auto rep = eval::run_grounding(source, items, judge);
            write_out(out, eval::render_report(rep, format_for(out, format)));
        } else if (*answers) {
            System sys(cfg);
            auto source = sys.source();
            std::string body;
            for (const auto& item : eval::load_benchmark(benchmark)) {
                const auto a = source.answer(item);
                nlohmann::json cites = nlohmann::json::array();
                for (const auto& c : a.citations) {
                    cites.push_back(c.marker());
                }
                body += nlohmann::json{{"id", item.id},
                                       {"query", item.query},
                                       {"answer", a.text},
                                       {"citations", cites},
                                       {"consumed_sensor", a.consumed_sensor},
                                       {"grounded", a.grounded},
                                       {"citations_resolve", a.citations_resolve},
                                       {"fallback", a.fallback},
                                       {"status", a.status}}
                            .dump() +
                        "\n";
            }
            write_out(out, body);
        } else if (*report) {
            std::ifstream in(records_in);
            std::vector<eval::ScoreRecord> records;
            std::string line;
            while (std::getline(in, line)) {
                if (!line.empty()) {
                    records.push_back(eval::record_from_json(nlohmann::json::parse(line)));
                }
            }
            write_out(out, eval::render_report(eval::aggregate(records), format_for(out, format)));
        }
    } catch (const std::exception& e) {
        std::cerr << "eval: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
