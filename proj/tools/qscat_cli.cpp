// Command-line driver: smatrix | collide | response | fdr | sweep | qme | verify

#include "qscat/runner.hpp"

#include <CLI11.hpp>

#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Collision-map and linear-response toolkit for 1D multichannel scattering"};
    app.require_subcommand(1);

    qscat::RunnerOptions opt;
    std::string command;

    const std::vector<std::string> names{"smatrix", "collide", "response", "fdr",
                                         "sweep",   "qme",     "verify"};
    for (const auto& name : names) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", opt.config_path, "configuration file (JSON)")
            ->required();
        sub->add_option("--out", opt.out_dir, "output directory");
        sub->add_option("--seed", opt.seed, "override the RNG seed");
        sub->add_flag("--oracle", opt.oracle, "add full-space-oracle comparison columns");
        sub->add_option("--grid-nodes", opt.grid_nodes, "override the energy grid size");
        sub->callback([&command, name]() { command = name; });
    }

    CLI11_PARSE(app, argc, argv);
    return qscat::run_command(command, opt);
}
