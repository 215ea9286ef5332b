// Advisory service: ingestion, read API, chat webhook and daily summaries.

#include <atomic>
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "agri/app.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sensor-grounded advisory service"};
    std::string config_path;
    std::string data_dir;
    std::string store_dir;
    std::string static_dir;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t workers = 2;
    bool log_stages = false;
    app.add_option("--config", config_path, "Runtime config JSON")->check(CLI::ExistingFile);
    app.add_option("--data", data_dir, "Data directory");
    app.add_option("--store", store_dir, "Store directory (in-memory when omitted)");
    app.add_option("--static", static_dir, "Directory of web assets served at /")->check(CLI::ExistingDirectory);
    app.add_option("--host", host);
    app.add_option("--port", port, "0 picks a free port")->check(CLI::Range(0, 65535));
    app.add_option("--workers", workers, "Chat worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--log-stages", log_stages, "Write per-stage latency records to stderr");
    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = config_path.empty() ? agri::app::AppConfig{} : agri::app::AppConfig::load(config_path);
        if (!data_dir.empty()) {
            cfg.data_dir = data_dir;
        }
        if (!store_dir.empty()) {
            cfg.store_dir = store_dir;
        }
        cfg.workers = workers;
        if (log_stages) {
            cfg.stage_log = &std::cerr;
        }

        agri::app::Runtime rt(cfg);
        std::optional<std::filesystem::path> assets;
        if (!static_dir.empty()) {
            assets = static_dir;
        }
        agri::service::ApiServer server(rt.service_context(assets));
        const int bound = server.start(host, port);
        std::cout << fmt::format("listening on http://{}:{}\n", host, bound) << std::flush;

        agri::pipeline::SummaryScheduler summaries(
            rt.store(), rt.orchestrator(), [&](const agri::FarmProfile& farm, const agri::pipeline::AdvisoryReply& r) {
                try {
                    rt.chat().send(r, farm.phone, false, "summary");
                } catch (const std::exception& e) {
                    std::cerr << fmt::format("summary for {} not delivered: {}\n", farm.farm_id, e.what());
                }
            });

        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        while (!g_stop) {
            summaries.tick(agri::app::unix_now());
            for (int i = 0; i < 10 && !g_stop; ++i) {
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            }
        }
        server.stop();
    } catch (const std::exception& e) {
        std::cerr << "agri-server: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
