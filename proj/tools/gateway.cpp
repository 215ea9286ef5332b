// Field gateway: buffers node readings and uplinks them to the ingestion service.
//
// File input replays the readings in accelerated time, using each reading's
// timestamp as the clock; `live` reads records from stdin on the wall clock.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "agri/app.hpp"
#include "agri/errors.hpp"
#include "agri/gateway.hpp"

namespace {

struct Counters {
    std::size_t read = 0;
    std::size_t invalid = 0;
    std::size_t duplicates = 0;
    std::size_t evicted = 0;
    std::size_t flushes = 0;
    std::size_t failed_flushes = 0;
    std::size_t sent = 0;
};

void step(agri::gateway::Gateway& gw, const agri::SensorReading& r, agri::Timestamp now, Counters& c) {
    ++c.read;
    if (agri::validate_reading(r)) {
        ++c.invalid;
        return;
    }
    auto res = gw.enqueue(r);
    c.duplicates += res.duplicate ? 1 : 0;
    c.evicted += res.evicted ? 1 : 0;
    try {
        if (auto report = gw.tick(now)) {
            ++c.flushes;
            c.sent += report->sent;
        }
    } catch (const agri::UplinkUnavailable&) {
        ++c.failed_flushes;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Store-and-forward field gateway"};
    app.require_subcommand(1);
    auto* run = app.add_subcommand("run", "Forward readings to the ingestion endpoint");

    std::string input;
    std::string endpoint;
    agri::Timestamp interval = 900;
    agri::Timestamp sampling = 300;
    std::vector<std::string> outages;
    std::string crop;
    run->add_option("--in", input, "Readings file (one JSON record per line) or 'live' for stdin")->required();
    run->add_option("--endpoint", endpoint, "Ingestion service base URL, e.g. http://127.0.0.1:8080")->required();
    run->add_option("--interval", interval, "Routine flush interval in seconds")->check(CLI::PositiveNumber);
    run->add_option("--sampling", sampling, "Node sampling interval in seconds (sizes the buffer)")
        ->check(CLI::PositiveNumber);
    run->add_option("--inject-outage", outages, "Refuse uplinks during 'from,to' (Unix seconds)");
    run->add_option("--crop", crop, "Crop whose band grades reading urgency");

    CLI11_PARSE(app, argc, argv);

    try {
        std::vector<agri::gateway::OutageUplink::Window> windows;
        for (const auto& o : outages) {
            windows.push_back(agri::gateway::parse_outage(o));
        }

        agri::gateway::GatewayConfig cfg;
        cfg.sampling_interval_s = sampling;
        cfg.base_flush_interval_s = interval;
        cfg.min_flush_interval_s = std::min<agri::Timestamp>(60, interval);
        if (!crop.empty()) {
            const auto bands = agri::CropBandTable::load(agri::app::default_data_dir() / "crop_bands.json");
            cfg.band = bands.band_for(crop);
        }

        const bool live = input == "live";
        agri::Timestamp clock = 0;
        auto now = [&] { return live ? agri::app::unix_now() : clock; };

        agri::gateway::HttpUplink http(endpoint);
        agri::gateway::OutageUplink uplink(http, now, windows);
        agri::gateway::Gateway gw(cfg, uplink);
        Counters c;

        std::ifstream file;
        if (!live) {
            file.open(input);
            if (!file) {
                throw std::runtime_error(fmt::format("cannot open {}", input));
            }
        }
        std::istream& in = live ? std::cin : file;
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) {
                continue;
            }
            agri::SensorReading r;
            try {
                r = agri::reading_from_json(nlohmann::json::parse(line));
            } catch (const std::exception& e) {
                ++c.invalid;
                std::cerr << "gateway: skipping record: " << e.what() << "\n";
                continue;
            }
            clock = std::max(clock, r.timestamp);
            step(gw, r, now(), c);
        }

        // Drain: keep retrying on the replay clock until the buffer empties.
        for (int i = 0; i < 10000 && gw.buffer().size() > 0; ++i) {
            if (!live) {
                clock = std::max(clock + interval, gw.next_retry_at());
            }
            try {
                auto report = gw.flush(now());
                ++c.flushes;
                c.sent += report.sent;
            } catch (const agri::UplinkUnavailable&) {
                ++c.failed_flushes;
                if (live) {
                    agri::RealTimeSource().sleep(gw.retry_backoff_s());
                }
            }
        }

        std::cerr << fmt::format(
            "read {} invalid {} duplicates {} evicted {} flushes {} failed {} sent {} pending {}\n", c.read,
            c.invalid, c.duplicates, c.evicted, c.flushes, c.failed_flushes, c.sent, gw.buffer().size());
        for (const auto& [node, seq] : gw.last_acked()) {
            std::cout << fmt::format("{}\t{}\n", node, seq);
        }
        return gw.buffer().size() == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "gateway: " << e.what() << "\n";
        return 1;
    }
}
