#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "maxcq/config.hpp"
#include "maxcq/runner.hpp"

namespace {

maxcq::SimConfig load(const std::string& config_path, const std::string& preset) {
    if (!config_path.empty() && !preset.empty()) {
        throw maxcq::ConfigError("give either --config or --preset, not both");
    }
    if (!config_path.empty()) return maxcq::load_config(config_path);
    if (!preset.empty()) return maxcq::preset_config(preset);
    throw maxcq::ConfigError("one of --config or --preset is required");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"1D Maxwell solver for multipole-Debye media: leapfrog-ADE and "
                 "convolution-quadrature schemes"};
    app.require_subcommand(1);

    std::string config_path, preset, scheme, dump_weights, schemes_csv;
    long steps = -1;
    double tol = 1e-10;

    CLI::App* sim = app.add_subcommand("simulate", "run one scheme and write CSV outputs");
    sim->add_option("--config", config_path, "config file (JSON)");
    sim->add_option("--preset", preset, "built-in preset name (tissue-interface)");
    sim->add_option("--scheme", scheme, "ade | cq-direct | cq-focq (overrides config)");
    sim->add_option("--steps", steps, "number of steps (overrides config)");
    sim->add_option("--dump-weights", dump_weights, "write the CQ weight tables to this CSV");

    CLI::App* cmp = app.add_subcommand("compare", "run schemes in lockstep and diff them");
    cmp->add_option("--config", config_path, "config file (JSON)");
    cmp->add_option("--preset", preset, "built-in preset name (tissue-interface)");
    cmp->add_option("--schemes", schemes_csv, "comma-separated scheme list")->required();
    cmp->add_option("--tol", tol, "relative tolerance for the verdict");
    cmp->add_option("--steps", steps, "number of steps (overrides config)");

    CLI::App* cfl = app.add_subcommand("cfl", "print the CFL bound tau_max");
    cfl->add_option("--config", config_path, "config file (JSON)");
    cfl->add_option("--preset", preset, "built-in preset name (tissue-interface)");

    CLI11_PARSE(app, argc, argv);

    try {
        maxcq::SimConfig config = load(config_path, preset);
        if (steps >= 1) config.n_steps = steps;
        if (!scheme.empty()) config.scheme = maxcq::parse_scheme(scheme);
        if (!dump_weights.empty()) config.weights.dump_path = dump_weights;

        if (sim->parsed()) {
            const maxcq::RunResult r = maxcq::run_simulation(config);
            std::cout << r.summary;
            return r.exit_code;
        }
        if (cmp->parsed()) {
            std::vector<maxcq::SchemeChoice> schemes;
            std::stringstream ss(schemes_csv);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (!item.empty()) schemes.push_back(maxcq::parse_scheme(item));
            }
            const maxcq::CompareResult r = maxcq::compare_schemes(config, schemes, tol);
            std::cout << r.summary;
            return r.exit_code;
        }
        // cfl
        const maxcq::Assembly a = maxcq::assemble(config);
        std::cout << "tau_max " << maxcq::format_float(a.tau_max) << " s\n";
        return 0;
    } catch (const maxcq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
