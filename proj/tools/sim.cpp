// Sensor-node simulator: scenario replay and link-envelope sampling.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "agri/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Simulated soil-sensor nodes"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Emit the readings a scenario produces, one JSON record per line");
    std::string scenario_path;
    agri::Timestamp duration = 86400;
    std::string out_path = "-";
    run->add_option("--scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
    run->add_option("--duration", duration, "Simulated seconds")->check(CLI::PositiveNumber);
    run->add_option("--out", out_path, "Output file, '-' for stdout");

    auto* pdr = app.add_subcommand("pdr", "Monte Carlo packet delivery ratio at given distances");
    std::vector<double> distances{100, 250, 425, 500, 600};
    std::size_t trials = 100000;
    std::uint64_t seed = 1;
    pdr->add_option("--distance", distances, "Distances in metres");
    pdr->add_option("--trials", trials, "Bernoulli trials per distance")->check(CLI::PositiveNumber);
    pdr->add_option("--seed", seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto scenario = agri::load_scenario(scenario_path);
            const auto readings = agri::run_scenario(scenario, duration);
            const auto body = agri::to_ndjson(readings);
            if (out_path == "-") {
                std::cout << body;
            } else {
                std::ofstream out(out_path);
                if (!out) {
                    throw std::runtime_error(fmt::format("cannot write {}", out_path));
                }
                out << body;
            }
            std::cerr << fmt::format("{} readings from {} nodes\n", readings.size(), scenario.nodes.size());
        } else if (*pdr) {
            const agri::LinkModel model;
            std::cout << "distance_m,model_pdr,simulated_pdr\n";
            for (double d : distances) {
                std::cout << fmt::format("{:.0f},{:.4f},{:.4f}\n", d, agri::delivery_probability(model, d),
                                         agri::simulate_delivery_ratio(model, d, trials, seed));
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "sim: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
