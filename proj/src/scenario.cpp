#include "agri/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "agri/errors.hpp"

namespace agri {

Scenario parse_scenario(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(fmt::format("scenario: {}", e.what()));
    }
    Scenario s;
    try {
        s.version = j.at("version").get<int>();
        if (s.version != kScenarioVersion) {
            throw ConfigError(fmt::format("scenario: unsupported version {}", s.version));
        }
        s.start_ts = j.value("start_ts", Timestamp{0});
        if (j.contains("link")) {
            const auto& l = j["link"];
            s.link.p_max = l.value("p_max", s.link.p_max);
            s.link.d_knee = l.value("d_knee", s.link.d_knee);
            s.link.d_90 = l.value("d_90", s.link.d_90);
            s.link.d_cutoff = l.value("d_cutoff", s.link.d_cutoff);
        }
        s.link.validate();
        for (const auto& n : j.at("nodes")) {
            NodeConfig cfg;
            cfg.node_id = n.at("node_id").get<std::string>();
            cfg.rng_seed = n.value("seed", std::uint64_t{1});
            cfg.sampling_interval_s = n.value("interval_s", Timestamp{300});
            cfg.profiles = default_profiles();
            if (n.contains("distance_m")) {
                cfg.distance_m = n["distance_m"].get<double>();
            }
            if (n.contains("metrics")) {
                for (const auto& [name, p] : n["metrics"].items()) {
                    auto& prof = cfg.profiles[index_of(parse_metric(name))];
                    prof.baseline = p.value("baseline", prof.baseline);
                    prof.drift_per_day = p.value("drift_per_day", prof.drift_per_day);
                    prof.noise = p.value("noise", prof.noise);
                }
            }
            if (cfg.sampling_interval_s <= 0) {
                throw ConfigError(fmt::format("scenario: node {} has non-positive interval", cfg.node_id));
            }
            s.nodes.push_back(std::move(cfg));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("scenario: {}", e.what()));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(fmt::format("scenario: {}", e.what()));
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open scenario {}", path.string()));
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::vector<SensorReading> run_scenario(const Scenario& scenario, Timestamp duration_s) {
    std::vector<SensorReading> out;
    for (const auto& cfg : scenario.nodes) {
        NodeSimulator sim(cfg, scenario.start_ts);
        // Separate stream so link loss never perturbs the measurement stream.
        std::mt19937_64 link_rng(cfg.rng_seed ^ 0x9E3779B97F4A7C15ULL);
        std::optional<std::bernoulli_distribution> delivered;
        if (cfg.distance_m) {
            delivered.emplace(delivery_probability(scenario.link, *cfg.distance_m));
        }
        for (Timestamp t = scenario.start_ts; t < scenario.start_ts + duration_s; t += cfg.sampling_interval_s) {
            auto r = sim.next_reading(t);
            if (!delivered || (*delivered)(link_rng)) {
                out.push_back(std::move(r));
            }
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const SensorReading& a, const SensorReading& b) {
        return std::tie(a.timestamp, a.node_id, a.seq) < std::tie(b.timestamp, b.node_id, b.seq);
    });
    return out;
}

} // namespace agri
