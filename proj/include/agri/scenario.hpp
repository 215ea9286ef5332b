#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "agri/telemetry.hpp"

namespace agri {

/// A versioned JSON document declaring the simulated nodes:
///
///   {"version": 1, "start_ts": 1717200000,
///    "link": {"p_max": 0.99, "d_knee": 100, "d_90": 425, "d_cutoff": 600},
///    "nodes": [{"node_id": "n1", "seed": 7, "interval_s": 300, "distance_m": 120,
///               "metrics": {"moisture": {"baseline": 30, "drift_per_day": -0.5, "noise": 0.4}}}]}
///
/// Metrics left out keep the defaults from default_profiles().
struct Scenario {
    int version = 1;
    Timestamp start_ts = 0;
    LinkModel link;
    std::vector<NodeConfig> nodes;
};

inline constexpr int kScenarioVersion = 1;

[[nodiscard]] Scenario parse_scenario(std::string_view json_text);
[[nodiscard]] Scenario load_scenario(const std::filesystem::path& path);

/// Steps every node on its own cadence for `duration_s` seconds and returns the
/// readings the gateway would receive, ordered by (timestamp, node_id). Nodes
/// with a distance lose packets per the link model; the rest are lossless.
[[nodiscard]] std::vector<SensorReading> run_scenario(const Scenario& scenario, Timestamp duration_s);

} // namespace agri
